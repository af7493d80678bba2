#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gossipcd/rng.hpp"
#include "gossipcd/topology.hpp"

namespace gossipcd::gossip {

using Mask = std::uint32_t;

/// Sensors whose period-n observations reached `owner` by the end of the
/// period's communication rounds. The owner bit is always set.
struct ReachSet {
    Mask bits = 0;
    std::size_t owner = 0;

    bool contains(std::size_t node) const { return (bits >> node) & 1u; }
    std::size_t count() const { return static_cast<std::size_t>(__builtin_popcount(bits)); }
};

/// One observation period's communication schedule.
struct GossipPeriod {
    std::size_t round_count = 0;
    std::vector<topology::Matching> matchings;
};

/// q-bar: the law of the reach set over the 2^N subset masks, for one owner
/// and one mean round count gamma. For the exact engine, truncation_mass is
/// the Poisson tail probability that was folded into the last computed round.
struct SubsetDistribution {
    std::size_t owner = 0;
    double mean_rounds = 0.0;
    std::vector<double> probs;  // length 2^N, indexed by subset mask
    double truncation_mass = 0.0;

    std::size_t node_count() const;
    void validate(double sum_tolerance = 1e-10) const;
};

inline constexpr double default_tail_eps = 1e-10;
inline constexpr std::size_t default_state_budget = std::size_t{1} << 19;
inline constexpr std::size_t default_transition_budget = std::size_t{1} << 24;

std::size_t sample_round_count(double gamma, Rng& rng);

GossipPeriod sample_period(const topology::MatchingDistribution& dist, double gamma, Rng& rng);

/// Applies the pointer dynamics s_m(i) = s_{m-1}(partner_m(i)) round by round
/// and accumulates the union of indices seen at `owner`.
ReachSet propagate(const GossipPeriod& period, std::size_t node_count, std::size_t owner);

/// Same dynamics, all owners in one pass.
std::vector<Mask> reach_masks(const GossipPeriod& period, std::size_t node_count);

/// Allocation-free period simulation for the Monte Carlo hot paths.
class ReachSimulator {
public:
    ReachSimulator(const topology::MatchingDistribution& dist, double gamma);

    /// Draws a Poisson round count and matchings, returns the owner's mask.
    Mask simulate_owner_mask(std::size_t owner, Rng& rng);

private:
    const topology::MatchingDistribution* dist_;
    double gamma_;
    std::poisson_distribution<long> rounds_;
    std::vector<std::uint8_t> held_, scratch_;
};

/// Exact law of the reach set. The per-round state is the full permutation
/// "node -> observation index currently held" plus the owner's accumulated
/// mask; one gossip round composes the permutation with a matching drawn from
/// the distribution. Round-m mask marginals are cached so Poisson mixtures at
/// many gamma values share one propagation pass.
class ExactReachAnalysis {
public:
    ExactReachAnalysis(const topology::MatchingDistribution& dist, std::size_t owner,
                       std::size_t state_budget = default_state_budget,
                       std::size_t transition_budget = default_transition_budget);

    std::size_t owner() const { return owner_; }
    std::size_t node_count() const { return node_count_; }
    std::size_t state_count() const { return transitions_.size(); }

    /// Mask marginal after exactly `rounds` communication rounds.
    const std::vector<double>& round_marginal(std::size_t rounds);

    /// Poisson(gamma) mixture of the round marginals, truncated where the
    /// upper tail mass drops below tail_eps; the residual mass is assigned to
    /// the last computed round.
    SubsetDistribution mix(double gamma, double tail_eps = default_tail_eps);

private:
    void advance_to(std::size_t rounds);

    std::size_t owner_ = 0;
    std::size_t node_count_ = 0;
    std::vector<double> weights_;                    // per support matching
    std::vector<std::vector<std::uint32_t>> transitions_;  // [state][matching] -> state
    std::vector<Mask> state_mask_;
    std::vector<double> dist_, scratch_;             // distribution over states
    std::size_t rounds_done_ = 0;
    std::vector<std::vector<double>> marginals_;     // [round][mask]
};

SubsetDistribution subset_distribution_exact(const topology::MatchingDistribution& dist,
                                             double gamma, std::size_t owner,
                                             double tail_eps = default_tail_eps);

SubsetDistribution subset_distribution_mc(const topology::MatchingDistribution& dist,
                                          double gamma, std::size_t owner, std::size_t trials,
                                          Rng& rng);

/// 1 - P(all observations available): the missing-observation rare-event probability.
double incomplete_probability(const SubsetDistribution& sd);

/// Rejection-free sampler for graphs too large to enumerate: repeatedly pick
/// a uniformly random unmatched node and pair it with itself or a uniformly
/// random unmatched neighbor, equal weight over the available options.
topology::Matching sample_matching_sequential(const topology::Graph& graph, Rng& rng);

} // namespace gossipcd::gossip
