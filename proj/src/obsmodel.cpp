#include "gossipcd/obsmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "gossipcd/error.hpp"

namespace gossipcd::obsmodel {

namespace {

constexpr double half_log_two_pi = 0.91893853320467274178;  // log(2*pi)/2
constexpr double kl_positivity_floor = 1e-12;
constexpr double tabulated_norm_tolerance = 1e-6;

void validate_density(const Density& density) {
    if (const auto* g = std::get_if<Gaussian>(&density)) {
        if (!(g->variance > 0.0))
            fail(errc::validation_error, "gaussian variance must be positive");
        if (!std::isfinite(g->mean) || !std::isfinite(g->variance))
            fail(errc::non_finite, "gaussian parameters must be finite");
        return;
    }
    const auto& t = std::get<Tabulated>(density);
    if (t.log_density.size() < 2)
        fail(errc::validation_error, "tabulated density needs at least 2 grid points");
    if (!(t.dx > 0.0)) fail(errc::validation_error, "tabulated grid step must be positive");
    double mass = 0.0;
    for (std::size_t i = 0; i + 1 < t.log_density.size(); ++i)
        mass += 0.5 * (std::exp(t.log_density[i]) + std::exp(t.log_density[i + 1])) * t.dx;
    if (std::abs(mass - 1.0) > tabulated_norm_tolerance)
        fail(errc::validation_error, "tabulated density integrates to " + std::to_string(mass) +
                                         ", expected 1 within 1e-6");
}

struct Support {
    double lo;
    double hi;
    bool hard;  // evaluation outside [lo,hi] is an error (tabulated grids)
};

Support effective_support(const Density& density) {
    if (const auto* g = std::get_if<Gaussian>(&density)) {
        const double sd = std::sqrt(g->variance);
        return {g->mean - 12.0 * sd, g->mean + 12.0 * sd, false};
    }
    const auto& t = std::get<Tabulated>(density);
    return {t.x0, t.x0 + t.dx * static_cast<double>(t.log_density.size() - 1), true};
}

bool in_support(const Density& density, double x) {
    if (std::holds_alternative<Gaussian>(density)) return true;
    const auto s = effective_support(density);
    return x >= s.lo && x <= s.hi;
}

} // namespace

double log_density(const Density& density, double x) {
    if (const auto* g = std::get_if<Gaussian>(&density)) {
        const double d = x - g->mean;
        return -0.5 * d * d / g->variance - 0.5 * std::log(g->variance) - half_log_two_pi;
    }
    const auto& t = std::get<Tabulated>(density);
    if (!in_support(density, x))
        fail(errc::out_of_support, "x = " + std::to_string(x) + " outside the tabulated grid");
    const double pos = (x - t.x0) / t.dx;
    const std::size_t i = std::min(static_cast<std::size_t>(pos), t.log_density.size() - 2);
    const double frac = pos - static_cast<double>(i);
    return t.log_density[i] + frac * (t.log_density[i + 1] - t.log_density[i]);
}

double sample(const Density& density, Rng& rng) {
    if (const auto* g = std::get_if<Gaussian>(&density)) {
        std::normal_distribution<double> normal(g->mean, std::sqrt(g->variance));
        return normal(rng);
    }
    // Inverse CDF on the trapezoid grid; density treated as piecewise linear
    // between knots, so each segment inverts a quadratic.
    const auto& t = std::get<Tabulated>(density);
    std::vector<double> cdf(t.log_density.size(), 0.0);
    for (std::size_t i = 1; i < cdf.size(); ++i)
        cdf[i] = cdf[i - 1] +
                 0.5 * (std::exp(t.log_density[i - 1]) + std::exp(t.log_density[i])) * t.dx;
    const double total = cdf.back();
    std::uniform_real_distribution<double> unit(0.0, total);
    const double u = unit(rng);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.begin()) ++it;
    if (it == cdf.end()) --it;
    const std::size_t i = static_cast<std::size_t>(it - cdf.begin()) - 1;
    const double f0 = std::exp(t.log_density[i]);
    const double f1 = std::exp(t.log_density[i + 1]);
    const double mass = (u - cdf[i]) / t.dx;  // integral of density over [0, frac]
    double frac;
    if (std::abs(f1 - f0) < 1e-300) {
        frac = f0 > 0.0 ? mass / f0 : 0.5;
    } else {
        const double disc = std::max(0.0, f0 * f0 + 2.0 * (f1 - f0) * mass);
        frac = (std::sqrt(disc) - f0) / (f1 - f0);
    }
    frac = std::clamp(frac, 0.0, 1.0);
    return t.x0 + t.dx * (static_cast<double>(i) + frac);
}

QuadratureResult kl_number_quadrature(const SensorDensityPair& pair, double rel_tol) {
    const Density& f1 = pair.post_change();
    const Density& f0 = pair.pre_change();
    const auto s1 = effective_support(f1);
    const auto s0 = effective_support(f0);
    // The integration window follows f1, which weights the integrand; only a
    // tabulated density imposes a hard cut (its log-density is undefined
    // outside the grid).
    double lo = s1.lo;
    double hi = s1.hi;
    if (s0.hard) {
        lo = std::max(lo, s0.lo);
        hi = std::min(hi, s0.hi);
    }
    if (!(hi > lo)) fail(errc::out_of_support, "density supports do not overlap");

    auto integrand = [&](double x) {
        const double l1 = log_density(f1, x);
        const double l0 = log_density(f0, x);
        return (l1 - l0) * std::exp(l1);
    };

    // Iterated trapezoid with Richardson extrapolation (Romberg); rows reuse
    // prior evaluations by adding midpoints. The base row is a dense composite
    // rule so concentrated integrands are resolved before extrapolation.
    constexpr int max_rows = 13;
    double table[max_rows];
    std::size_t intervals = 512;
    double trap;
    {
        const double h = (hi - lo) / static_cast<double>(intervals);
        double acc = 0.5 * (integrand(lo) + integrand(hi));
        for (std::size_t i = 1; i < intervals; ++i)
            acc += integrand(lo + h * static_cast<double>(i));
        trap = acc * h;
    }
    table[0] = trap;
    double best = trap, best_err = std::numeric_limits<double>::infinity();
    for (int row = 1; row < max_rows; ++row) {
        const double h = (hi - lo) / static_cast<double>(intervals);
        double midsum = 0.0;
        for (std::size_t i = 0; i < intervals; ++i)
            midsum += integrand(lo + h * (static_cast<double>(i) + 0.5));
        intervals *= 2;
        trap = 0.5 * trap + 0.5 * h * midsum;
        double prev_diag = table[row - 1];
        double cur = trap;
        double pow4 = 1.0;
        for (int k = 1; k <= row; ++k) {
            pow4 *= 4.0;
            const double next = cur + (cur - table[k - 1]) / (pow4 - 1.0);
            table[k - 1] = cur;
            cur = next;
        }
        table[row] = cur;
        const double err = std::abs(cur - prev_diag);
        if (err < best_err) {
            best = cur;
            best_err = err;
        }
        if (row >= 3 && err <= rel_tol * std::max(1.0, std::abs(cur)))
            return {cur, err};
    }
    return {best, best_err};
}

double kl_number(const SensorDensityPair& pair) {
    const auto* g1 = std::get_if<Gaussian>(&pair.post_change());
    const auto* g0 = std::get_if<Gaussian>(&pair.pre_change());
    double value;
    if (g1 && g0) {
        const double dm = g1->mean - g0->mean;
        value = 0.5 * (std::log(g0->variance / g1->variance) +
                       (g1->variance + dm * dm) / g0->variance - 1.0);
    } else {
        value = kl_number_quadrature(pair).value;
    }
    if (!std::isfinite(value)) fail(errc::non_finite, "KL number is not finite");
    if (value <= kl_positivity_floor)
        fail(errc::nondistinguishable_pair,
             "KL number " + std::to_string(value) + " is not positive; the density pair is "
             "indistinguishable");
    return value;
}

double log_likelihood_ratio(const SensorDensityPair& pair, double x) {
    return log_density(pair.post_change(), x) - log_density(pair.pre_change(), x);
}

SensorDensityPair SensorDensityPair::create(Density pre_change, Density post_change) {
    validate_density(pre_change);
    validate_density(post_change);
    SensorDensityPair pair(std::move(pre_change), std::move(post_change));
    kl_number(pair);  // validates 0 < D(f1,f0) < inf
    SensorDensityPair reversed(pair.post_, pair.pre_);
    kl_number(reversed);  // and 0 < D(f0,f1) < inf
    return pair;
}

std::vector<double> ObservationModel::per_sensor_kl() const {
    std::vector<double> out;
    out.reserve(sensors_.size());
    for (const auto& s : sensors_) out.push_back(kl_number(s));
    return out;
}

double ObservationModel::centralized_kl() const {
    const auto kls = per_sensor_kl();
    return std::accumulate(kls.begin(), kls.end(), 0.0);
}

KLSummary KLSummary::from_model(const ObservationModel& model) {
    KLSummary summary;
    summary.per_sensor = model.per_sensor_kl();
    summary.centralized =
        std::accumulate(summary.per_sensor.begin(), summary.per_sensor.end(), 0.0);
    return summary;
}

void KLSummary::add_distributed(std::size_t owner, double gamma, double value) {
    if (owner >= per_sensor.size()) fail(errc::out_of_range, "owner out of range");
    const double tol = 1e-9;
    if (value < per_sensor[owner] - tol || value > centralized + tol)
        fail(errc::validation_error,
             "distributed KL number violates the sandwich D_i <= D^i_gamma <= D");
    distributed.push_back({owner, gamma, value});
}

double distributed_kl(const gossip::SubsetDistribution& sd, const std::vector<double>& kls) {
    sd.validate();
    const std::size_t n = sd.node_count();
    if (kls.size() != n)
        fail(errc::invalid_argument, "KL array length does not match the subset distribution");

    // kl_sum[mask] built by peeling the lowest set bit
    std::vector<double> kl_sum(sd.probs.size(), 0.0);
    for (std::size_t mask = 1; mask < kl_sum.size(); ++mask) {
        const std::size_t low = static_cast<std::size_t>(__builtin_ctzll(mask));
        kl_sum[mask] = kl_sum[mask & (mask - 1)] + kls[low];
    }
    double acc = 0.0;
    for (std::size_t mask = 1; mask < kl_sum.size(); ++mask) acc += sd.probs[mask] * kl_sum[mask];
    return acc;
}

KlBounds kl_bounds_thm4(const std::vector<double>& kls, std::size_t owner,
                        const markov::BoundParams& bp, double gamma) {
    if (owner >= kls.size()) fail(errc::out_of_range, "owner out of range");
    if (kls.size() < 2) fail(errc::invalid_argument, "need at least two sensors");
    if (bp.degenerate())
        fail(errc::degenerate_bound, "bound parameters are degenerate; convergence bounds undefined");
    if (gamma < 0.0) fail(errc::out_of_range, "gamma must be nonnegative");

    double max_other = 0.0;
    double min_other = std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (std::size_t j = 0; j < kls.size(); ++j) {
        total += kls[j];
        if (j == owner) continue;
        max_other = std::max(max_other, kls[j]);
        min_other = std::min(min_other, kls[j]);
    }
    return {total - max_other * std::exp(gamma * bp.upper_rate),
            total - min_other * std::exp(gamma * bp.lower_rate)};
}

} // namespace gossipcd::obsmodel
