#pragma once

#include <cstddef>
#include <limits>
#include <vector>

namespace gossipcd::detector {

/// Numerically stable log(exp(a) + exp(b)); -inf behaves as log(0).
double logaddexp(double a, double b);

enum class ModeKind { centralized, isolated, distributed };

struct Mode {
    ModeKind kind = ModeKind::centralized;
    std::size_t sensor = 0;  // meaningful for isolated and distributed

    static Mode centralized() { return {ModeKind::centralized, 0}; }
    static Mode isolated(std::size_t sensor) { return {ModeKind::isolated, sensor}; }
    static Mode distributed(std::size_t sensor) { return {ModeKind::distributed, sensor}; }
};

/// Geometric prior parameter, threshold, and which log-likelihood terms feed
/// the recursion. All three test variants share one recursion; the mode only
/// decides the llr sum.
class DetectorConfig {
public:
    DetectorConfig(double rho, double threshold, Mode mode);

    double rho() const { return rho_; }
    double threshold() const { return threshold_; }
    double log_threshold() const { return log_threshold_; }
    double log_rho() const { return log_rho_; }
    double log_one_minus_rho() const { return log_one_minus_rho_; }
    const Mode& mode() const { return mode_; }

private:
    double rho_;
    double threshold_;
    double log_threshold_;
    double log_rho_;
    double log_one_minus_rho_;
    Mode mode_;
};

/// Log-domain Shiryaev statistic. log_lambda == -inf encodes the exact
/// initial condition Lambda_0 = 0.
struct DetectorState {
    double log_lambda = -std::numeric_limits<double>::infinity();
    std::size_t step = 0;
};

DetectorState step(const DetectorState& state, const DetectorConfig& config, double llr_sum);

bool has_stopped(const DetectorState& state, const DetectorConfig& config);

/// A = (1 - alpha)/alpha, which guarantees PFA <= alpha.
double threshold_from_pfa(double alpha);

/// Random-walk-plus-nonlinear-term view of the statistic:
/// log Lambda_n = log rho + W_n + l_n with W_n = Z_n + n|log(1-rho)|.
struct Decomposition {
    double z = 0.0;  // cumulative llr sum
    double w = 0.0;  // random-walk part
    double l = 0.0;  // nonlinear term, nonnegative and nondecreasing
};

/// Streaming decomposition; O(1) work per step via a log-domain recurrence
/// for the interior sum of l_n.
class DecompositionTracker {
public:
    explicit DecompositionTracker(double rho);

    Decomposition push(double llr_sum);
    std::size_t step() const { return n_; }

private:
    double log_one_minus_rho_;
    double z_ = 0.0;
    // log of sum_{k=1}^{n-1} (1-rho)^k exp(-Z_k)
    double log_interior_ = -std::numeric_limits<double>::infinity();
    std::size_t n_ = 0;
};

/// Decomposes a whole llr history and verifies the reconstruction identity
/// against the step recursion at every index (IdentityViolation beyond 1e-6).
std::vector<Decomposition> decompose(const std::vector<double>& llr_sums, double rho);

} // namespace gossipcd::detector
