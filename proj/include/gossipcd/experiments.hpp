#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gossipcd/detector.hpp"
#include "gossipcd/gossip.hpp"
#include "gossipcd/obsmodel.hpp"
#include "gossipcd/topology.hpp"

namespace gossipcd::experiments {

struct ExperimentConfig {
    topology::MatchingDistribution matching_dist;  // owns a copy of the graph
    obsmodel::ObservationModel model;
    double rho = 0.1;
    double gamma = 6.0;
    detector::Mode mode = detector::Mode::centralized();
    std::vector<double> thresholds;
    std::size_t trials_per_threshold = 100000;
    std::size_t max_horizon = 100000;
    double censoring_cap = 0.001;
    std::uint64_t master_seed = 0;
    std::size_t threads = 0;  // 0 = hardware concurrency

    const topology::Graph& graph() const { return matching_dist.graph(); }
    std::size_t node_count() const { return graph().node_count(); }
    void validate() const;
};

struct TrialOutcome {
    std::size_t change_time = 0;  // lambda, in periods
    std::size_t stop_time = 0;    // tau; meaningless when censored
    bool false_alarm = false;     // tau < lambda
    long long delay = -1;         // tau - lambda when tau >= lambda
    bool censored = false;
};

/// One full sequential trial: sample (or force) the change time, feed the
/// detector one period at a time, stop at the threshold or the horizon.
/// Deterministic given the rng state.
TrialOutcome run_trial(const ExperimentConfig& config, double threshold,
                       std::optional<std::size_t> forced_change_time, Rng& rng,
                       std::size_t horizon);

struct RatePoint {
    double threshold = 0.0;
    double cadd1 = 0.0;
    double cadd1_se = 0.0;
    double pfa = 0.0;
    double pfa_se = 0.0;
    double log_pfa = 0.0;
    double log_pfa_se = 0.0;
    bool has_pfa = false;  // false when no false alarm was observed (point dropped)
    std::size_t pfa_trials = 0;
    std::size_t cadd_trials = 0;
    double add = 0.0;  // descriptive ADD from the prior-sampled batch
    double add_se = 0.0;
    std::size_t add_trials = 0;
};

struct EstimateResult {
    std::vector<RatePoint> points;
    std::vector<std::string> warnings;
    std::size_t horizon_used = 0;
};

/// Per threshold: PFA from prior-sampled change times, CADD_1 from trials
/// forced to change at period 1. Censored trials are excluded and counted;
/// the horizon doubles (bounded) if censoring exceeds the cap.
EstimateResult estimate_pfa_cadd(const ExperimentConfig& config);

struct DecayFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    double r_squared = 0.0;
    std::size_t points_used = 0;
};

/// Weighted least squares of ln PFA on CADD_1; the slope estimates the large
/// deviation decay rate, the intercept absorbs the unknown constants.
DecayFit fit_decay_rate(const std::vector<RatePoint>& points);

struct SecondLayerRow {
    double gamma = 0.0;
    double incomplete = 0.0;
    double curve = 0.0;  // ln(incomplete)/gamma
    double lower_rate = 0.0;
    double upper_rate = 0.0;
    std::string method;  // "exact" or "mc"
};

/// Decay curve of the missing-observation probability for the config's sensor, with the window-L bound
/// lines attached. Falls back to Monte Carlo when the exact engine refuses
/// (state budget) and mc_trials > 0.
std::vector<SecondLayerRow> second_layer_curve(const ExperimentConfig& config,
                                               const std::vector<double>& gamma_grid,
                                               std::size_t window = 15,
                                               std::size_t mc_trials = 0);

struct KlSweepRow {
    double gamma = 0.0;
    std::size_t owner = 0;
    double exact_dkl = 0.0;
    double thm4_lower = 0.0;
    double thm4_upper = 0.0;
    double centralized_kl = 0.0;
};

/// Exact distributed KL numbers against their convergence bound curves.
std::vector<KlSweepRow> kl_convergence_sweep(const ExperimentConfig& config,
                                             const std::vector<double>& gamma_grid,
                                             std::size_t window = 15);

/// The llr sum feeding one detector step: all sensors, one sensor, or the
/// reach set, over this period's observations.
double llr_sum_for_mode(const obsmodel::ObservationModel& model, const detector::Mode& mode,
                        const std::vector<double>& observations, gossip::Mask reach_mask);

std::size_t resolve_owner(const ExperimentConfig& config);

} // namespace gossipcd::experiments
