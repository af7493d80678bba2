#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include "gossipcd/gossip.hpp"
#include "gossipcd/markov.hpp"
#include "gossipcd/rng.hpp"

namespace gossipcd::obsmodel {

struct Gaussian {
    double mean = 0.0;
    double variance = 1.0;
};

/// Log-density values on a uniform grid; linear interpolation between knots,
/// no support outside [x0, x0 + (size-1)*dx].
struct Tabulated {
    double x0 = 0.0;
    double dx = 0.0;
    std::vector<double> log_density;
};

using Density = std::variant<Gaussian, Tabulated>;

double log_density(const Density& density, double x);
double sample(const Density& density, Rng& rng);

struct QuadratureResult {
    double value = 0.0;
    double error_estimate = 0.0;
};

/// Pre/post-change density pair of one sensor. Construction validates the
/// densities and the positivity of both KL numbers.
class SensorDensityPair {
public:
    static SensorDensityPair create(Density pre_change, Density post_change);

    const Density& pre_change() const { return pre_; }
    const Density& post_change() const { return post_; }

private:
    SensorDensityPair(Density pre, Density post)
        : pre_(std::move(pre)), post_(std::move(post)) {}

    Density pre_;
    Density post_;
};

/// D(f1, f0) in nats. Closed form for Gaussian pairs, adaptive trapezoid
/// quadrature otherwise.
double kl_number(const SensorDensityPair& pair);

/// Quadrature route for any pair; the independent cross-check of the closed
/// form and the production path for tabulated densities.
QuadratureResult kl_number_quadrature(const SensorDensityPair& pair, double rel_tol = 1e-10);

/// log f1(x) - log f0(x), straight from the log densities.
double log_likelihood_ratio(const SensorDensityPair& pair, double x);

class ObservationModel {
public:
    explicit ObservationModel(std::vector<SensorDensityPair> sensors)
        : sensors_(std::move(sensors)) {}

    std::size_t sensor_count() const { return sensors_.size(); }
    const SensorDensityPair& sensor(std::size_t i) const { return sensors_[i]; }
    const std::vector<SensorDensityPair>& sensors() const { return sensors_; }

    std::vector<double> per_sensor_kl() const;
    double centralized_kl() const;

private:
    std::vector<SensorDensityPair> sensors_;
};

/// KL bookkeeping: per-sensor numbers, their sum, and any distributed numbers
/// computed so far. Stored distributed entries must respect the sandwich
/// D_i <= D^i_gamma <= D.
struct KLSummary {
    struct DistributedEntry {
        std::size_t owner = 0;
        double gamma = 0.0;
        double value = 0.0;
    };

    std::vector<double> per_sensor;
    double centralized = 0.0;
    std::vector<DistributedEntry> distributed;

    static KLSummary from_model(const ObservationModel& model);
    void add_distributed(std::size_t owner, double gamma, double value);
};

/// The distributed KL number: sum over subsets of q-bar times the subset's
/// KL mass.
double distributed_kl(const gossip::SubsetDistribution& sd, const std::vector<double>& kls);

/// Convergence bounds on the distributed KL number at mean round count
/// gamma; asymptotic in gamma, returned verbatim.
struct KlBounds {
    double lower = 0.0;
    double upper = 0.0;
};
KlBounds kl_bounds_thm4(const std::vector<double>& kls, std::size_t owner,
                        const markov::BoundParams& bp, double gamma);

} // namespace gossipcd::obsmodel
