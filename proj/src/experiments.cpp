#include "gossipcd/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <thread>

#include "gossipcd/error.hpp"
#include "gossipcd/markov.hpp"

namespace gossipcd::experiments {

namespace {

constexpr std::uint64_t stream_cadd = 0x0c4dd;
constexpr std::uint64_t stream_pfa = 0x0f9a;
constexpr std::size_t max_horizon_doublings = 6;

std::size_t effective_threads(std::size_t configured) {
    if (configured > 0) return configured;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    const std::size_t chunk = (count + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

// Per-trial sampler with the Gaussian fast path precomputed. Keeping the
// normal_distribution objects alive across periods matters in the hot loop.
class TrialSampler {
public:
    explicit TrialSampler(const obsmodel::ObservationModel& model) : model_(&model) {
        const std::size_t n = model.sensor_count();
        sensors_.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& pair = model.sensor(i);
            Sensor s;
            const auto* g0 = std::get_if<obsmodel::Gaussian>(&pair.pre_change());
            const auto* g1 = std::get_if<obsmodel::Gaussian>(&pair.post_change());
            if (g0 && g1) {
                s.gaussian = true;
                s.pre = std::normal_distribution<double>(g0->mean, std::sqrt(g0->variance));
                s.post = std::normal_distribution<double>(g1->mean, std::sqrt(g1->variance));
                // llr(x) = a2 x^2 + a1 x + a0
                s.a2 = 0.5 * (1.0 / g0->variance - 1.0 / g1->variance);
                s.a1 = g1->mean / g1->variance - g0->mean / g0->variance;
                s.a0 = 0.5 * (g0->mean * g0->mean / g0->variance -
                              g1->mean * g1->mean / g1->variance) +
                       0.5 * std::log(g0->variance / g1->variance);
            }
            sensors_.push_back(s);
        }
    }

    double draw(std::size_t sensor, bool post_change, Rng& rng) {
        auto& s = sensors_[sensor];
        if (s.gaussian) return post_change ? s.post(rng) : s.pre(rng);
        const auto& pair = model_->sensor(sensor);
        return obsmodel::sample(post_change ? pair.post_change() : pair.pre_change(), rng);
    }

    double llr(std::size_t sensor, double x) const {
        const auto& s = sensors_[sensor];
        if (s.gaussian) return (s.a2 * x + s.a1) * x + s.a0;
        return obsmodel::log_likelihood_ratio(model_->sensor(sensor), x);
    }

private:
    struct Sensor {
        bool gaussian = false;
        std::normal_distribution<double> pre, post;
        double a2 = 0.0, a1 = 0.0, a0 = 0.0;
    };

    const obsmodel::ObservationModel* model_;
    std::vector<Sensor> sensors_;
};

struct BatchStats {
    std::size_t trials = 0;
    std::size_t censored = 0;
    std::size_t false_alarms = 0;
    std::size_t delay_count = 0;  // non-censored detections (tau >= lambda)
    long double delay_sum = 0.0;
    long double delay_sq_sum = 0.0;
};

BatchStats reduce_outcomes(const std::vector<TrialOutcome>& outcomes) {
    BatchStats s;
    s.trials = outcomes.size();
    for (const auto& o : outcomes) {
        if (o.censored) {
            ++s.censored;
            continue;
        }
        if (o.false_alarm) {
            ++s.false_alarms;
        } else {
            ++s.delay_count;
            const long double d = static_cast<long double>(o.delay);
            s.delay_sum += d;
            s.delay_sq_sum += d * d;
        }
    }
    return s;
}

double sample_se(long double sum, long double sq_sum, std::size_t n) {
    if (n < 2) return 0.0;
    const long double mean = sum / static_cast<long double>(n);
    const long double var =
        (sq_sum - static_cast<long double>(n) * mean * mean) / static_cast<long double>(n - 1);
    return var > 0.0 ? std::sqrt(static_cast<double>(var) / static_cast<double>(n)) : 0.0;
}

} // namespace

void ExperimentConfig::validate() const {
    if (model.sensor_count() != node_count())
        fail(errc::validation_error,
             "sensors: expected one density pair per node (" + std::to_string(node_count()) +
                 "), got " + std::to_string(model.sensor_count()));
    if (!(rho > 0.0) || !(rho < 1.0)) fail(errc::validation_error, "rho must lie in (0,1)");
    if (gamma < 0.0) fail(errc::validation_error, "gamma must be nonnegative");
    if (mode.kind != detector::ModeKind::centralized && mode.sensor >= node_count())
        fail(errc::validation_error, "mode sensor index out of range");
    if (thresholds.empty()) fail(errc::validation_error, "thresholds must be non-empty");
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (!(thresholds[i] > 0.0)) fail(errc::validation_error, "thresholds must be positive");
        if (i && !(thresholds[i] > thresholds[i - 1]))
            fail(errc::validation_error, "thresholds must be strictly increasing");
    }
    if (trials_per_threshold < 1) fail(errc::validation_error, "trials_per_threshold must be >= 1");
    if (max_horizon < 1) fail(errc::validation_error, "max_horizon must be >= 1");
    if (!(censoring_cap > 0.0) || censoring_cap >= 1.0)
        fail(errc::validation_error, "censoring_cap must lie in (0,1)");
    const auto a_bar = topology::averaged_matrix(matching_dist);
    if (!topology::check_irreducible_aperiodic(a_bar))
        fail(errc::validation_error,
             "irreducibility: averaged matrix must be irreducible and aperiodic");
    model.per_sensor_kl();  // throws on nondistinguishable pairs
}

std::size_t resolve_owner(const ExperimentConfig& config) {
    if (config.mode.kind == detector::ModeKind::centralized)
        fail(errc::invalid_argument,
             "this operation needs a sensor; use an isolated/distributed mode or --owner");
    return config.mode.sensor;
}

double llr_sum_for_mode(const obsmodel::ObservationModel& model, const detector::Mode& mode,
                        const std::vector<double>& observations, gossip::Mask reach_mask) {
    double acc = 0.0;
    switch (mode.kind) {
    case detector::ModeKind::centralized:
        for (std::size_t j = 0; j < model.sensor_count(); ++j)
            acc += obsmodel::log_likelihood_ratio(model.sensor(j), observations[j]);
        return acc;
    case detector::ModeKind::isolated:
        return obsmodel::log_likelihood_ratio(model.sensor(mode.sensor),
                                              observations[mode.sensor]);
    case detector::ModeKind::distributed:
        for (std::size_t j = 0; j < model.sensor_count(); ++j)
            if ((reach_mask >> j) & 1u)
                acc += obsmodel::log_likelihood_ratio(model.sensor(j), observations[j]);
        return acc;
    }
    fail(errc::internal, "unknown detector mode");
}

TrialOutcome run_trial(const ExperimentConfig& config, double threshold,
                       std::optional<std::size_t> forced_change_time, Rng& rng,
                       std::size_t horizon) {
    const std::size_t n = config.node_count();
    const detector::Mode mode = config.mode;

    std::size_t lambda;
    if (forced_change_time) {
        lambda = *forced_change_time;
        if (lambda < 1) fail(errc::out_of_range, "change time must be >= 1");
    } else {
        std::geometric_distribution<long long> geo(config.rho);
        lambda = static_cast<std::size_t>(geo(rng)) + 1;  // support {1,2,...}
    }

    detector::DetectorConfig det(config.rho, threshold, mode);
    detector::DetectorState state;
    TrialSampler sampler(config.model);

    const bool distributed = mode.kind == detector::ModeKind::distributed;
    const bool isolated = mode.kind == detector::ModeKind::isolated;
    std::optional<gossip::ReachSimulator> reach;
    if (distributed) reach.emplace(config.matching_dist, config.gamma);

    TrialOutcome outcome;
    outcome.change_time = lambda;

    for (std::size_t period = 1; period <= horizon; ++period) {
        const bool post = period >= lambda;
        double llr_sum = 0.0;
        if (isolated) {
            const double x = sampler.draw(mode.sensor, post, rng);
            llr_sum = sampler.llr(mode.sensor, x);
        } else {
            gossip::Mask mask = ~gossip::Mask{0};
            if (distributed) mask = reach->simulate_owner_mask(mode.sensor, rng);
            for (std::size_t j = 0; j < n; ++j) {
                const double x = sampler.draw(j, post, rng);
                if ((mask >> j) & 1u) llr_sum += sampler.llr(j, x);
            }
        }
        state = detector::step(state, det, llr_sum);
        if (detector::has_stopped(state, det)) {
            outcome.stop_time = period;
            outcome.false_alarm = period < lambda;
            outcome.delay = outcome.false_alarm ? -1
                                                : static_cast<long long>(period - lambda);
            return outcome;
        }
    }
    outcome.censored = true;
    return outcome;
}

EstimateResult estimate_pfa_cadd(const ExperimentConfig& config) {
    config.validate();
    const std::size_t threads = effective_threads(config.threads);
    const std::size_t trials = config.trials_per_threshold;

    EstimateResult result;
    result.horizon_used = config.max_horizon;

    auto run_batch = [&](double threshold, std::size_t threshold_index, std::uint64_t stream,
                         std::optional<std::size_t> forced, std::size_t& horizon_used)
        -> std::vector<TrialOutcome> {
        std::vector<TrialOutcome> outcomes(trials);
        std::size_t horizon = config.max_horizon;
        for (std::size_t attempt = 0;; ++attempt) {
            parallel_for(trials, threads, [&](std::size_t t) {
                Rng rng = make_rng(config.master_seed, stream, threshold_index, t);
                outcomes[t] = run_trial(config, threshold, forced, rng, horizon);
            });
            const std::size_t censored =
                static_cast<std::size_t>(std::count_if(outcomes.begin(), outcomes.end(),
                                                       [](const auto& o) { return o.censored; }));
            const double frac = static_cast<double>(censored) / static_cast<double>(trials);
            if (frac <= config.censoring_cap || attempt >= max_horizon_doublings) {
                if (frac > config.censoring_cap)
                    result.warnings.push_back(
                        "censoring " + std::to_string(frac) + " above cap at threshold " +
                        std::to_string(threshold) + " even at horizon " + std::to_string(horizon));
                horizon_used = std::max(horizon_used, horizon);
                return outcomes;
            }
            horizon *= 2;
            result.warnings.push_back("censoring above cap at threshold " +
                                      std::to_string(threshold) + "; horizon doubled to " +
                                      std::to_string(horizon));
        }
    };

    for (std::size_t k = 0; k < config.thresholds.size(); ++k) {
        const double threshold = config.thresholds[k];
        RatePoint point;
        point.threshold = threshold;

        const auto cadd_outcomes =
            run_batch(threshold, k, stream_cadd, std::size_t{1}, result.horizon_used);
        const BatchStats cadd = reduce_outcomes(cadd_outcomes);
        point.cadd_trials = cadd.delay_count;
        if (cadd.delay_count > 0) {
            point.cadd1 = static_cast<double>(cadd.delay_sum /
                                              static_cast<long double>(cadd.delay_count));
            point.cadd1_se = sample_se(cadd.delay_sum, cadd.delay_sq_sum, cadd.delay_count);
        }

        const auto pfa_outcomes =
            run_batch(threshold, k, stream_pfa, std::nullopt, result.horizon_used);
        const BatchStats pfa = reduce_outcomes(pfa_outcomes);
        const std::size_t used = pfa.trials - pfa.censored;
        point.pfa_trials = used;
        if (pfa.false_alarms > 0 && used > 0) {
            const double p = static_cast<double>(pfa.false_alarms) / static_cast<double>(used);
            point.pfa = p;
            point.pfa_se = std::sqrt(p * (1.0 - p) / static_cast<double>(used));
            point.log_pfa = std::log(p);
            point.log_pfa_se = std::sqrt((1.0 - p) / (static_cast<double>(used) * p));
            point.has_pfa = true;
        } else {
            result.warnings.push_back("no false alarms at threshold " + std::to_string(threshold) +
                                      "; ln PFA undefined, point dropped from the fit");
        }
        point.add_trials = pfa.delay_count;
        if (pfa.delay_count > 0) {
            point.add =
                static_cast<double>(pfa.delay_sum / static_cast<long double>(pfa.delay_count));
            point.add_se = sample_se(pfa.delay_sum, pfa.delay_sq_sum, pfa.delay_count);
        }

        result.points.push_back(point);
    }
    return result;
}

DecayFit fit_decay_rate(const std::vector<RatePoint>& points) {
    std::vector<const RatePoint*> usable;
    for (const auto& p : points)
        if (p.has_pfa) usable.push_back(&p);
    if (usable.size() < 3)
        fail(errc::degenerate_fit, "need at least 3 rate points with observed false alarms, got " +
                                       std::to_string(usable.size()));
    double lo = usable.front()->cadd1, hi = lo;
    for (const auto* p : usable) {
        lo = std::min(lo, p->cadd1);
        hi = std::max(hi, p->cadd1);
    }
    if (hi - lo < 1.0)
        fail(errc::degenerate_fit, "CADD spread below one period; slope is unidentifiable");

    double wsum = 0.0, xbar = 0.0, ybar = 0.0;
    for (const auto* p : usable) {
        const double var = p->log_pfa_se * p->log_pfa_se;
        const double w = var > 0.0 ? 1.0 / var : 1.0;
        wsum += w;
        xbar += w * p->cadd1;
        ybar += w * p->log_pfa;
    }
    xbar /= wsum;
    ybar /= wsum;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto* p : usable) {
        const double var = p->log_pfa_se * p->log_pfa_se;
        const double w = var > 0.0 ? 1.0 / var : 1.0;
        const double dx = p->cadd1 - xbar;
        const double dy = p->log_pfa - ybar;
        sxx += w * dx * dx;
        sxy += w * dx * dy;
        syy += w * dy * dy;
    }
    DecayFit fit;
    fit.points_used = usable.size();
    fit.slope = sxy / sxx;
    fit.intercept = ybar - fit.slope * xbar;
    fit.slope_stderr = std::sqrt(1.0 / sxx);
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    if (!std::isfinite(fit.slope)) fail(errc::degenerate_fit, "slope is not finite");
    return fit;
}

std::vector<SecondLayerRow> second_layer_curve(const ExperimentConfig& config,
                                               const std::vector<double>& gamma_grid,
                                               std::size_t window, std::size_t mc_trials) {
    for (std::size_t i = 0; i < gamma_grid.size(); ++i) {
        if (!(gamma_grid[i] > 0.0))
            fail(errc::out_of_range, "gamma grid must be strictly positive");
        if (i && !(gamma_grid[i] > gamma_grid[i - 1]))
            fail(errc::out_of_range, "gamma grid must be increasing");
    }
    const std::size_t owner = resolve_owner(config);
    const auto a_bar = topology::averaged_matrix(config.matching_dist);
    const auto bp = markov::bound_params(a_bar, owner, window);
    std::vector<SecondLayerRow> rows;
    rows.reserve(gamma_grid.size());

    try {
        gossip::ExactReachAnalysis analysis(config.matching_dist, owner);
        for (double gamma : gamma_grid) {
            const auto sd = analysis.mix(gamma);
            const double inc = gossip::incomplete_probability(sd);
            rows.push_back({gamma, inc, std::log(inc) / gamma, bp.lower_rate, bp.upper_rate,
                            "exact"});
        }
        return rows;
    } catch (const Error& e) {
        if (e.code() != std::string(errc::too_large) || mc_trials == 0) throw;
    }

    for (std::size_t gi = 0; gi < gamma_grid.size(); ++gi) {
        const double gamma = gamma_grid[gi];
        Rng rng = make_rng(config.master_seed, 0x5ec0, gi);
        const auto sd =
            gossip::subset_distribution_mc(config.matching_dist, gamma, owner, mc_trials, rng);
        const double inc = gossip::incomplete_probability(sd);
        rows.push_back({gamma, inc, std::log(inc) / gamma, bp.lower_rate, bp.upper_rate, "mc"});
    }
    return rows;
}

std::vector<KlSweepRow> kl_convergence_sweep(const ExperimentConfig& config,
                                             const std::vector<double>& gamma_grid,
                                             std::size_t window) {
    const std::size_t owner = resolve_owner(config);
    const auto kls = config.model.per_sensor_kl();
    const double centralized = std::accumulate(kls.begin(), kls.end(), 0.0);
    const auto a_bar = topology::averaged_matrix(config.matching_dist);
    const auto bp = markov::bound_params(a_bar, owner, window);

    gossip::ExactReachAnalysis analysis(config.matching_dist, owner);
    std::vector<KlSweepRow> rows;
    rows.reserve(gamma_grid.size());
    for (double gamma : gamma_grid) {
        if (gamma < 0.0) fail(errc::out_of_range, "gamma must be nonnegative");
        const auto sd = analysis.mix(gamma);
        const double dkl = obsmodel::distributed_kl(sd, kls);
        const auto bounds = obsmodel::kl_bounds_thm4(kls, owner, bp, gamma);
        rows.push_back({gamma, owner, dkl, bounds.lower, bounds.upper, centralized});
    }
    return rows;
}

} // namespace gossipcd::experiments
