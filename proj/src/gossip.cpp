#include "gossipcd/gossip.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

#include "gossipcd/error.hpp"

namespace gossipcd::gossip {

namespace {

double poisson_log_pmf(std::size_t m, double gamma) {
    if (gamma == 0.0) return m == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    const double md = static_cast<double>(m);
    return md * std::log(gamma) - gamma - std::lgamma(md + 1.0);
}

// Permutation packed 4 bits per node plus the mask above; N <= 12 keeps the
// key inside 64 bits.
std::uint64_t pack_state(const std::vector<std::uint8_t>& perm, Mask mask) {
    std::uint64_t key = 0;
    for (std::size_t i = 0; i < perm.size(); ++i)
        key |= static_cast<std::uint64_t>(perm[i] & 0xf) << (4 * i);
    key |= static_cast<std::uint64_t>(mask) << 48;
    return key;
}

} // namespace

std::size_t SubsetDistribution::node_count() const {
    std::size_t n = 0;
    while ((std::size_t{1} << n) < probs.size()) ++n;
    return n;
}

void SubsetDistribution::validate(double sum_tolerance) const {
    const std::size_t n = node_count();
    if (probs.size() != (std::size_t{1} << n))
        fail(errc::validation_error, "subset distribution length is not a power of two");
    if (owner >= n) fail(errc::out_of_range, "subset distribution owner out of range");
    double sum = 0.0;
    for (std::size_t mask = 0; mask < probs.size(); ++mask) {
        const double p = probs[mask];
        if (p < 0.0) fail(errc::validation_error, "negative subset probability");
        if (((mask >> owner) & 1u) == 0 && p != 0.0)
            fail(errc::validation_error, "subset without the owner bit has positive mass");
        sum += p;
    }
    if (std::abs(sum - 1.0) > sum_tolerance)
        fail(errc::validation_error, "subset probabilities sum to " + std::to_string(sum));
}

std::size_t sample_round_count(double gamma, Rng& rng) {
    if (gamma < 0.0) fail(errc::out_of_range, "gamma must be nonnegative");
    if (gamma == 0.0) return 0;
    std::poisson_distribution<long> pois(gamma);
    return static_cast<std::size_t>(pois(rng));
}

GossipPeriod sample_period(const topology::MatchingDistribution& dist, double gamma, Rng& rng) {
    GossipPeriod period;
    period.round_count = sample_round_count(gamma, rng);
    period.matchings.reserve(period.round_count);
    for (std::size_t m = 0; m < period.round_count; ++m) period.matchings.push_back(dist.sample(rng));
    return period;
}

std::vector<Mask> reach_masks(const GossipPeriod& period, std::size_t node_count) {
    GOSSIPCD_CHECK(period.round_count == period.matchings.size(),
                   "gossip period round count does not match its matching list");
    std::vector<std::uint8_t> held(node_count), next(node_count);
    std::vector<Mask> masks(node_count);
    for (std::size_t i = 0; i < node_count; ++i) {
        held[i] = static_cast<std::uint8_t>(i);
        masks[i] = Mask{1} << i;
    }
    for (const auto& matching : period.matchings) {
        GOSSIPCD_CHECK(matching.partner.size() == node_count,
                       "matching size does not match node count");
        for (std::size_t i = 0; i < node_count; ++i) next[i] = held[matching.partner[i]];
        held.swap(next);
        // accumulation by union keeps the masks monotone across rounds
        for (std::size_t i = 0; i < node_count; ++i) masks[i] |= Mask{1} << held[i];
    }
    return masks;
}

ReachSet propagate(const GossipPeriod& period, std::size_t node_count, std::size_t owner) {
    if (owner >= node_count) fail(errc::out_of_range, "owner out of range");
    ReachSet rs;
    rs.owner = owner;
    rs.bits = reach_masks(period, node_count)[owner];
    return rs;
}

ReachSimulator::ReachSimulator(const topology::MatchingDistribution& dist, double gamma)
    : dist_(&dist), gamma_(gamma), rounds_(gamma > 0.0 ? gamma : 1.0),
      held_(dist.graph().node_count()), scratch_(dist.graph().node_count()) {
    if (gamma < 0.0) fail(errc::out_of_range, "gamma must be nonnegative");
}

Mask ReachSimulator::simulate_owner_mask(std::size_t owner, Rng& rng) {
    const std::size_t n = held_.size();
    const long rounds = gamma_ > 0.0 ? rounds_(rng) : 0;
    for (std::size_t i = 0; i < n; ++i) held_[i] = static_cast<std::uint8_t>(i);
    Mask mask = Mask{1} << owner;
    for (long m = 0; m < rounds; ++m) {
        const auto& matching = dist_->sample(rng);
        for (std::size_t i = 0; i < n; ++i) scratch_[i] = held_[matching.partner[i]];
        held_.swap(scratch_);
        mask |= Mask{1} << held_[owner];
    }
    return mask;
}

ExactReachAnalysis::ExactReachAnalysis(const topology::MatchingDistribution& dist,
                                       std::size_t owner, std::size_t state_budget,
                                       std::size_t transition_budget) {
    const std::size_t n = dist.graph().node_count();
    if (n > 12)
        fail(errc::too_large, "exact reach analysis supports at most 12 nodes");
    if (owner >= n) fail(errc::out_of_range, "owner out of range");
    owner_ = owner;
    node_count_ = n;

    const auto& entries = dist.entries();
    weights_.reserve(entries.size());
    for (const auto& e : entries) weights_.push_back(e.weight);

    // Breadth-first closure of the reachable (permutation, mask) states.
    std::unordered_map<std::uint64_t, std::uint32_t> index;
    std::vector<std::vector<std::uint8_t>> perms;
    std::vector<std::uint8_t> identity(n);
    for (std::size_t i = 0; i < n; ++i) identity[i] = static_cast<std::uint8_t>(i);
    const Mask start_mask = Mask{1} << owner;
    index.emplace(pack_state(identity, start_mask), 0);
    perms.push_back(identity);
    state_mask_.push_back(start_mask);

    std::vector<std::uint8_t> composed(n);
    for (std::size_t s = 0; s < perms.size(); ++s) {
        if (perms.size() > state_budget ||
            perms.size() * entries.size() > transition_budget)
            fail(errc::too_large,
                 "exact reach analysis state space exceeds budget (" +
                     std::to_string(perms.size()) + " states, " +
                     std::to_string(entries.size()) + " matchings); use the Monte Carlo path");
        transitions_.emplace_back();
        auto& row = transitions_.back();
        row.reserve(entries.size());
        const auto perm = perms[s];  // copy: perms may reallocate below
        const Mask mask = state_mask_[s];
        for (const auto& e : entries) {
            for (std::size_t x = 0; x < n; ++x) composed[x] = perm[e.matching.partner[x]];
            const Mask grown = mask | (Mask{1} << composed[owner]);
            const std::uint64_t key = pack_state(composed, grown);
            auto [it, inserted] = index.emplace(key, static_cast<std::uint32_t>(perms.size()));
            if (inserted) {
                perms.push_back(composed);
                state_mask_.push_back(grown);
            }
            row.push_back(it->second);
        }
    }

    dist_.assign(perms.size(), 0.0);
    scratch_.assign(perms.size(), 0.0);
    dist_[0] = 1.0;
    marginals_.push_back(std::vector<double>(std::size_t{1} << n, 0.0));
    marginals_[0][start_mask] = 1.0;
}

void ExactReachAnalysis::advance_to(std::size_t rounds) {
    const std::size_t nmask = std::size_t{1} << node_count_;
    while (rounds_done_ < rounds) {
        std::fill(scratch_.begin(), scratch_.end(), 0.0);
        for (std::size_t s = 0; s < dist_.size(); ++s) {
            const double p = dist_[s];
            if (p == 0.0) continue;
            const auto& row = transitions_[s];
            for (std::size_t k = 0; k < weights_.size(); ++k) scratch_[row[k]] += p * weights_[k];
        }
        dist_.swap(scratch_);
        ++rounds_done_;
        std::vector<double> marginal(nmask, 0.0);
        for (std::size_t s = 0; s < dist_.size(); ++s)
            if (dist_[s] != 0.0) marginal[state_mask_[s]] += dist_[s];
        marginals_.push_back(std::move(marginal));
    }
}

const std::vector<double>& ExactReachAnalysis::round_marginal(std::size_t rounds) {
    advance_to(rounds);
    return marginals_[rounds];
}

SubsetDistribution ExactReachAnalysis::mix(double gamma, double tail_eps) {
    if (gamma < 0.0) fail(errc::out_of_range, "gamma must be nonnegative");
    if (!(tail_eps > 0.0) || tail_eps > 1e-6)
        fail(errc::invalid_eps, "tail_eps must lie in (0, 1e-6]");

    const std::size_t nmask = std::size_t{1} << node_count_;

    // Bennett-style bound on the truncation round keeps the per-round
    // marginal cache (and the propagation work) within a fixed budget.
    const double log_eps = std::log(tail_eps);
    const double rounds_bound =
        gamma + std::sqrt(-2.0 * gamma * log_eps) - log_eps + 16.0;
    if (rounds_bound * static_cast<double>(nmask) > static_cast<double>(std::size_t{1} << 24))
        fail(errc::too_large, "gamma = " + std::to_string(gamma) +
                                  " needs too many exact rounds at this node count");
    SubsetDistribution sd;
    sd.owner = owner_;
    sd.mean_rounds = gamma;
    sd.probs.assign(nmask, 0.0);

    double cdf = 0.0;
    std::size_t m = 0;
    for (;;) {
        const double pm = std::exp(poisson_log_pmf(m, gamma));
        cdf += pm;
        const auto& marginal = round_marginal(m);
        for (std::size_t mask = 0; mask < nmask; ++mask) sd.probs[mask] += pm * marginal[mask];
        // the rounds_bound backstop terminates even if the pmf underflows
        // before the tail condition is met
        if (1.0 - cdf < tail_eps || static_cast<double>(m) > rounds_bound) break;
        ++m;
    }
    const double residual = 1.0 - cdf;
    if (residual > 0.0) {
        const auto& marginal = round_marginal(m);
        for (std::size_t mask = 0; mask < nmask; ++mask)
            sd.probs[mask] += residual * marginal[mask];
        sd.truncation_mass = residual;
    }
    sd.validate();
    return sd;
}

SubsetDistribution subset_distribution_exact(const topology::MatchingDistribution& dist,
                                             double gamma, std::size_t owner, double tail_eps) {
    ExactReachAnalysis analysis(dist, owner);
    return analysis.mix(gamma, tail_eps);
}

SubsetDistribution subset_distribution_mc(const topology::MatchingDistribution& dist,
                                          double gamma, std::size_t owner, std::size_t trials,
                                          Rng& rng) {
    if (trials < 1) fail(errc::out_of_range, "trials must be at least 1");
    const std::size_t n = dist.graph().node_count();
    if (n > 20) fail(errc::too_large, "subset distributions are limited to 20 nodes");
    if (owner >= n) fail(errc::out_of_range, "owner out of range");

    std::vector<std::size_t> counts(std::size_t{1} << n, 0);
    ReachSimulator sim(dist, gamma);
    for (std::size_t t = 0; t < trials; ++t) ++counts[sim.simulate_owner_mask(owner, rng)];

    SubsetDistribution sd;
    sd.owner = owner;
    sd.mean_rounds = gamma;
    sd.probs.resize(counts.size());
    for (std::size_t mask = 0; mask < counts.size(); ++mask)
        sd.probs[mask] = static_cast<double>(counts[mask]) / static_cast<double>(trials);
    sd.validate();
    return sd;
}

double incomplete_probability(const SubsetDistribution& sd) {
    // Summing the non-full masses keeps relative accuracy when the full mask
    // carries almost all of the probability (1 - probs[full] would cancel).
    double acc = 0.0;
    for (std::size_t mask = 0; mask + 1 < sd.probs.size(); ++mask) acc += sd.probs[mask];
    return acc;
}

topology::Matching sample_matching_sequential(const topology::Graph& graph, Rng& rng) {
    const std::size_t n = graph.node_count();
    std::vector<std::uint8_t> partner(n, 0xff);
    std::vector<std::size_t> unmatched(n);
    for (std::size_t i = 0; i < n; ++i) unmatched[i] = i;

    std::vector<std::size_t> options;
    while (!unmatched.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, unmatched.size() - 1);
        const std::size_t ui = pick(rng);
        const std::size_t u = unmatched[ui];

        options.clear();
        options.push_back(u);
        for (std::size_t v : graph.neighbors(u))
            if (partner[v] == 0xff) options.push_back(v);
        std::uniform_int_distribution<std::size_t> choose(0, options.size() - 1);
        const std::size_t v = options[choose(rng)];

        partner[u] = static_cast<std::uint8_t>(v);
        partner[v] = static_cast<std::uint8_t>(u);
        std::erase_if(unmatched, [&](std::size_t x) { return x == u || x == v; });
    }
    return topology::Matching{std::move(partner)};
}

} // namespace gossipcd::gossip
