#include "gossipcd/topology.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>

#include "gossipcd/error.hpp"

namespace gossipcd::topology {

namespace {

std::string edge_str(std::size_t a, std::size_t b) {
    return "(" + std::to_string(a) + "," + std::to_string(b) + ")";
}

} // namespace

Graph Graph::build(std::size_t node_count,
                   const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    if (node_count < 2)
        fail(errc::invalid_edge, "node_count must be at least 2, got " + std::to_string(node_count));

    Graph g;
    g.node_count_ = node_count;
    g.adjacency_.resize(node_count);

    for (auto [a, b] : edges) {
        if (a >= node_count || b >= node_count)
            fail(errc::invalid_edge, "edge " + edge_str(a, b) + " out of range for " +
                                         std::to_string(node_count) + " nodes");
        if (a == b)
            fail(errc::invalid_edge, "self-loop edge " + edge_str(a, b) +
                                         " (self-communication is implicit)");
        if (a > b) std::swap(a, b);
        g.edges_.emplace_back(a, b);
    }
    std::sort(g.edges_.begin(), g.edges_.end());
    auto dup = std::adjacent_find(g.edges_.begin(), g.edges_.end());
    if (dup != g.edges_.end())
        fail(errc::invalid_edge, "duplicate edge " + edge_str(dup->first, dup->second));

    for (auto [a, b] : g.edges_) {
        g.adjacency_[a].push_back(b);
        g.adjacency_[b].push_back(a);
    }
    for (auto& nbrs : g.adjacency_) std::sort(nbrs.begin(), nbrs.end());

    // connectivity (BFS from node 0)
    std::vector<char> seen(node_count, 0);
    std::queue<std::size_t> frontier;
    frontier.push(0);
    seen[0] = 1;
    std::size_t reached = 1;
    while (!frontier.empty()) {
        std::size_t u = frontier.front();
        frontier.pop();
        for (std::size_t v : g.adjacency_[u]) {
            if (!seen[v]) {
                seen[v] = 1;
                ++reached;
                frontier.push(v);
            }
        }
    }
    if (reached != node_count)
        fail(errc::disconnected_graph,
             "graph is not connected (" + std::to_string(reached) + " of " +
                 std::to_string(node_count) + " nodes reachable from node 0)");
    return g;
}

bool Graph::has_edge(std::size_t a, std::size_t b) const {
    if (a == b) return false;
    const auto& nbrs = adjacency_[a];
    return std::binary_search(nbrs.begin(), nbrs.end(), b);
}

Graph build_graph(std::size_t node_count,
                  const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    return Graph::build(node_count, edges);
}

bool Matching::is_involution() const {
    const std::size_t n = partner.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (partner[i] >= n) return false;
        if (partner[partner[i]] != i) return false;
    }
    return true;
}

bool Matching::respects(const Graph& graph) const {
    if (partner.size() != graph.node_count()) return false;
    if (!is_involution()) return false;
    for (std::size_t i = 0; i < partner.size(); ++i)
        if (partner[i] != i && !graph.has_edge(i, partner[i])) return false;
    return true;
}

std::vector<Matching> enumerate_matchings(const Graph& graph) {
    const std::size_t n = graph.node_count();
    if (n > enumeration_cap)
        fail(errc::too_large, "matching enumeration capped at " +
                                  std::to_string(enumeration_cap) + " nodes, got " +
                                  std::to_string(n));

    std::vector<Matching> out;
    std::vector<std::uint8_t> partner(n, 0xff);

    // Smallest unassigned node pairs with itself first, then with each larger
    // unassigned neighbor in ascending order; this yields lexicographic order
    // on the partner arrays.
    auto rec = [&](auto&& self, std::size_t from) -> void {
        std::size_t i = from;
        while (i < n && partner[i] != 0xff) ++i;
        if (i == n) {
            out.push_back(Matching{partner});
            return;
        }
        partner[i] = static_cast<std::uint8_t>(i);
        self(self, i + 1);
        partner[i] = 0xff;
        for (std::size_t j : graph.neighbors(i)) {
            if (j > i && partner[j] == 0xff) {
                partner[i] = static_cast<std::uint8_t>(j);
                partner[j] = static_cast<std::uint8_t>(i);
                self(self, i + 1);
                partner[i] = 0xff;
                partner[j] = 0xff;
            }
        }
    };
    rec(rec, 0);
    return out;
}

void MatchingDistribution::finalize() {
    double total = 0.0;
    cumulative_.clear();
    cumulative_.reserve(entries_.size());
    for (const auto& e : entries_) {
        if (!(e.weight > 0.0))
            fail(errc::validation_error, "matching weights must be strictly positive");
        if (!e.matching.respects(graph_))
            fail(errc::validation_error, "matching does not respect the support graph");
        total += e.weight;
        cumulative_.push_back(total);
    }
    if (std::abs(total - 1.0) > probability_tolerance)
        fail(errc::validation_error, "matching weights sum to " + std::to_string(total) +
                                         ", expected 1 within 1e-12");
    cumulative_.back() = 1.0;
}

MatchingDistribution MatchingDistribution::uniform(Graph graph, std::vector<Matching> matchings) {
    if (matchings.empty()) fail(errc::empty_support, "no matchings to distribute over");
    MatchingDistribution d(std::move(graph));
    const double w = 1.0 / static_cast<double>(matchings.size());
    d.entries_.reserve(matchings.size());
    for (auto& m : matchings) d.entries_.push_back({std::move(m), w});
    d.finalize();
    return d;
}

MatchingDistribution MatchingDistribution::explicit_weights(Graph graph,
                                                            std::vector<Entry> entries) {
    if (entries.empty()) fail(errc::empty_support, "no matchings to distribute over");
    MatchingDistribution d(std::move(graph));
    d.entries_ = std::move(entries);
    d.finalize();
    return d;
}

const Matching& MatchingDistribution::sample(Rng& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return entries_[static_cast<std::size_t>(it - cumulative_.begin())].matching;
}

MatchingDistribution uniform_distribution(const Graph& graph, std::vector<Matching> matchings) {
    return MatchingDistribution::uniform(graph, std::move(matchings));
}

AveragedMatrix AveragedMatrix::from_entries(std::size_t n, std::vector<double> row_major) {
    GOSSIPCD_CHECK(row_major.size() == n * n, "averaged matrix has wrong element count");
    AveragedMatrix m;
    m.n_ = n;
    m.data_ = std::move(row_major);
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0, col = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double v = m.at(i, j);
            if (v < 0.0 || v > 1.0)
                fail(errc::validation_error, "averaged matrix entry outside [0,1]");
            if (std::abs(v - m.at(j, i)) > probability_tolerance)
                fail(errc::validation_error, "averaged matrix is not symmetric");
            row += v;
            col += m.at(j, i);
        }
        if (std::abs(row - 1.0) > probability_tolerance || std::abs(col - 1.0) > probability_tolerance)
            fail(errc::validation_error, "averaged matrix is not doubly stochastic");
    }
    return m;
}

AveragedMatrix averaged_matrix(const MatchingDistribution& dist) {
    const std::size_t n = dist.graph().node_count();
    std::vector<double> data(n * n, 0.0);
    for (const auto& e : dist.entries())
        for (std::size_t i = 0; i < n; ++i) data[i * n + e.matching.partner[i]] += e.weight;
    return AveragedMatrix::from_entries(n, std::move(data));
}

bool check_irreducible_aperiodic(const AveragedMatrix& a_bar) {
    const std::size_t n = a_bar.size();

    // Irreducibility: connectivity of the positive pattern (symmetric).
    std::vector<int> level(n, -1);
    std::queue<std::size_t> frontier;
    frontier.push(0);
    level[0] = 0;
    std::size_t reached = 1;
    // BFS levels double as input to the period computation below.
    std::vector<std::pair<std::size_t, std::size_t>> pattern_edges;
    while (!frontier.empty()) {
        std::size_t u = frontier.front();
        frontier.pop();
        for (std::size_t v = 0; v < n; ++v) {
            if (a_bar.at(u, v) <= 0.0) continue;
            pattern_edges.emplace_back(u, v);
            if (level[v] < 0) {
                level[v] = level[u] + 1;
                ++reached;
                frontier.push(v);
            }
        }
    }
    if (reached != n) return false;

    // Period: gcd over all pattern edges (u,v) of level[u] + 1 - level[v].
    long long g = 0;
    for (auto [u, v] : pattern_edges) {
        long long d = static_cast<long long>(level[u]) + 1 - level[v];
        g = std::gcd(g, std::abs(d));
    }
    return g == 1;
}

} // namespace gossipcd::topology
