#include "gossipcd/markov.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "gossipcd/error.hpp"

namespace gossipcd::markov {

namespace {

void require_irreducible(const topology::AveragedMatrix& a_bar) {
    // Reachability on the positive pattern; symmetric, so plain BFS suffices.
    const std::size_t n = a_bar.size();
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
        std::size_t u = stack.back();
        stack.pop_back();
        for (std::size_t v = 0; v < n; ++v) {
            if (!seen[v] && a_bar.at(u, v) > 0.0) {
                seen[v] = 1;
                ++reached;
                stack.push_back(v);
            }
        }
    }
    if (reached != n)
        fail(errc::not_irreducible, "averaged matrix is reducible; hitting times diverge");
}

} // namespace

bool BoundParams::has_lower_rate() const {
    return lower_rate != -std::numeric_limits<double>::infinity();
}

HittingTailTable hitting_tail(const topology::AveragedMatrix& a_bar, std::size_t target,
                              std::size_t horizon) {
    const std::size_t n = a_bar.size();
    if (target >= n) fail(errc::out_of_range, "target node out of range");
    require_irreducible(a_bar);

    std::vector<std::size_t> others;
    others.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
        if (j != target) others.push_back(j);

    std::vector<double> v(others.size(), 1.0), next(others.size(), 0.0);
    for (std::size_t step = 0; step < horizon; ++step) {
        for (std::size_t a = 0; a < others.size(); ++a) {
            double s = 0.0;
            for (std::size_t b = 0; b < others.size(); ++b)
                s += a_bar.at(others[a], others[b]) * v[b];
            next[a] = s;
        }
        v.swap(next);
    }

    HittingTailTable table;
    table.target = target;
    table.horizon = horizon;
    table.tail.assign(n, 0.0);
    for (std::size_t a = 0; a < others.size(); ++a) table.tail[others[a]] = v[a];
    return table;
}

BoundParams bound_params(const topology::AveragedMatrix& a_bar, std::size_t target,
                         std::size_t window) {
    if (window < 1) fail(errc::out_of_range, "window L must be at least 1");
    if (!topology::check_irreducible_aperiodic(a_bar))
        fail(errc::not_irreducible, "averaged matrix must be irreducible and aperiodic");

    // alpha = 1 exactly when some state cannot reach the target within L
    // steps; detect that structurally (BFS on the positive pattern) rather
    // than through a rounded tail value.
    {
        const std::size_t n = a_bar.size();
        std::vector<std::size_t> dist(n, n + 1);
        std::vector<std::size_t> frontier{target};
        dist[target] = 0;
        while (!frontier.empty()) {
            std::vector<std::size_t> next;
            for (std::size_t u : frontier)
                for (std::size_t v = 0; v < n; ++v)
                    if (a_bar.at(v, u) > 0.0 && dist[v] > dist[u] + 1) {
                        dist[v] = dist[u] + 1;
                        next.push_back(v);
                    }
            frontier = std::move(next);
        }
        for (std::size_t j = 0; j < n; ++j)
            if (j != target && dist[j] > window)
                fail(errc::degenerate_bound,
                     "alpha = max_j P(T_j > L) is 1 at L = " + std::to_string(window) +
                         "; state " + std::to_string(j) +
                         " cannot reach the target within the window");
    }

    const HittingTailTable table = hitting_tail(a_bar, target, window);
    double alpha = 0.0;
    double beta = 1.0;
    for (std::size_t j = 0; j < a_bar.size(); ++j) {
        if (j == target) continue;
        alpha = std::max(alpha, table.tail[j]);
        beta = std::min(beta, table.tail[j]);
    }

    if (alpha >= 1.0)
        fail(errc::degenerate_bound,
             "alpha = max_j P(T_j > L) is 1 at L = " + std::to_string(window) +
                 "; some state cannot reach the target within the window");
    if (alpha <= 0.0)
        fail(errc::degenerate_bound,
             "alpha underflowed to 0 at L = " + std::to_string(window));

    BoundParams bp;
    bp.target = target;
    bp.window = window;
    bp.alpha = alpha;
    bp.beta = beta;
    bp.upper_rate = std::log(alpha) / static_cast<double>(window);
    // beta == 0 is reported as an explicit sentinel, never a silent number.
    bp.lower_rate = beta > 0.0 ? std::log(beta) / static_cast<double>(window)
                               : -std::numeric_limits<double>::infinity();
    return bp;
}

std::vector<BoundParams> bounds_vs_window(const topology::AveragedMatrix& a_bar,
                                          std::size_t target,
                                          const std::vector<std::size_t>& windows) {
    std::vector<BoundParams> out;
    out.reserve(windows.size());
    for (std::size_t L : windows) out.push_back(bound_params(a_bar, target, L));
    return out;
}

} // namespace gossipcd::markov
