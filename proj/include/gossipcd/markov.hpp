#pragma once

#include <cstddef>
#include <vector>

#include "gossipcd/topology.hpp"

namespace gossipcd::markov {

/// P(T_j > horizon) for every start state j != target, where T_j is the
/// hitting time of `target` for the chain with kernel A-bar.
struct HittingTailTable {
    std::size_t target = 0;
    std::size_t horizon = 0;
    std::vector<double> tail;  // indexed by node; tail[target] is 0 by convention

    double at(std::size_t j) const { return tail[j]; }
};

/// The window-L bound parameters: alpha = max_j P(T_j > L), beta = min_j.
/// beta can underflow to exactly zero for large L; the lower rate is then the
/// explicit -infinity sentinel and has_lower_rate() reports false.
struct BoundParams {
    std::size_t target = 0;
    std::size_t window = 1;
    double alpha = 0.0;
    double beta = 0.0;
    double upper_rate = 0.0;  // ln(alpha)/L, per communication round
    double lower_rate = 0.0;  // ln(beta)/L, or -inf when beta == 0

    bool has_lower_rate() const;
    bool degenerate() const { return alpha >= 1.0 || !has_lower_rate(); }
};

/// Exact taboo-power computation: delete the target's row and column from
/// A-bar to get Q, then tail = Q^horizon * 1. Equals the path sum over
/// trajectories avoiding the target.
HittingTailTable hitting_tail(const topology::AveragedMatrix& a_bar, std::size_t target,
                              std::size_t horizon);

BoundParams bound_params(const topology::AveragedMatrix& a_bar, std::size_t target,
                         std::size_t window);

std::vector<BoundParams> bounds_vs_window(const topology::AveragedMatrix& a_bar,
                                          std::size_t target,
                                          const std::vector<std::size_t>& windows);

} // namespace gossipcd::markov
