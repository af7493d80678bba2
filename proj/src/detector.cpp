#include "gossipcd/detector.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "gossipcd/error.hpp"

namespace gossipcd::detector {

namespace {
constexpr double neg_inf = -std::numeric_limits<double>::infinity();
}

double logaddexp(double a, double b) {
    if (a == neg_inf) return b;
    if (b == neg_inf) return a;
    const double m = a > b ? a : b;
    return m + std::log1p(std::exp(-(a > b ? a - b : b - a)));
}

DetectorConfig::DetectorConfig(double rho, double threshold, Mode mode)
    : rho_(rho), threshold_(threshold), mode_(mode) {
    if (!(rho > 0.0) || !(rho < 1.0))
        fail(errc::out_of_range, "rho must lie strictly inside (0,1), got " + std::to_string(rho));
    if (!(threshold > 0.0))
        fail(errc::out_of_range, "threshold A must be positive, got " + std::to_string(threshold));
    log_threshold_ = std::log(threshold);
    log_rho_ = std::log(rho);
    log_one_minus_rho_ = std::log1p(-rho);
}

DetectorState step(const DetectorState& state, const DetectorConfig& config, double llr_sum) {
    if (!std::isfinite(llr_sum))
        fail(errc::non_finite, "llr sum must be finite, got " + std::to_string(llr_sum));
    DetectorState next;
    next.log_lambda = -config.log_one_minus_rho() +
                      logaddexp(state.log_lambda, config.log_rho()) + llr_sum;
    next.step = state.step + 1;
    return next;
}

bool has_stopped(const DetectorState& state, const DetectorConfig& config) {
    return state.log_lambda >= config.log_threshold();
}

double threshold_from_pfa(double alpha) {
    if (!(alpha > 0.0) || !(alpha < 1.0))
        fail(errc::out_of_range, "target PFA must lie in (0,1), got " + std::to_string(alpha));
    return (1.0 - alpha) / alpha;
}

DecompositionTracker::DecompositionTracker(double rho) {
    if (!(rho > 0.0) || !(rho < 1.0))
        fail(errc::out_of_range, "rho must lie strictly inside (0,1)");
    log_one_minus_rho_ = std::log1p(-rho);
}

Decomposition DecompositionTracker::push(double llr_sum) {
    if (!std::isfinite(llr_sum)) fail(errc::non_finite, "llr sum must be finite");
    ++n_;
    // l_n uses Z_1..Z_{n-1}, so read the interior sum before updating z_.
    double l;
    if (log_interior_ == neg_inf) {
        l = 0.0;
    } else if (log_interior_ < 30.0) {
        l = std::log1p(std::exp(log_interior_));
    } else {
        l = log_interior_ + std::log1p(std::exp(-log_interior_));
    }
    z_ += llr_sum;
    const double w = z_ + static_cast<double>(n_) * -log_one_minus_rho_;
    // append the k = n term (1-rho)^n exp(-Z_n) for the next step
    log_interior_ = logaddexp(log_interior_,
                              static_cast<double>(n_) * log_one_minus_rho_ - z_);
    return {z_, w, l};
}

std::vector<Decomposition> decompose(const std::vector<double>& llr_sums, double rho) {
    DecompositionTracker tracker(rho);
    DetectorConfig config(rho, 1.0, Mode::centralized());
    DetectorState state;
    std::vector<Decomposition> out;
    out.reserve(llr_sums.size());
    const double log_rho = std::log(rho);
    for (double llr : llr_sums) {
        state = step(state, config, llr);
        Decomposition d = tracker.push(llr);
        const double reconstructed = log_rho + d.w + d.l;
        if (std::abs(reconstructed - state.log_lambda) > 1e-6)
            fail(errc::identity_violation,
                 "decomposition identity log Lambda = log rho + W + l violated at step " +
                     std::to_string(tracker.step()) + " (error " +
                     std::to_string(std::abs(reconstructed - state.log_lambda)) + ")");
        out.push_back(d);
    }
    return out;
}

} // namespace gossipcd::detector
