#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "gossipcd/rng.hpp"

namespace gossipcd::topology {

/// Undirected sensor-network graph. Nodes are 0..N-1; self-communication is
/// implicit, so edges never contain (i,i). Connectivity is verified at
/// construction and all analysis operations rely on it.
class Graph {
public:
    static Graph build(std::size_t node_count,
                       const std::vector<std::pair<std::size_t, std::size_t>>& edges);

    std::size_t node_count() const { return node_count_; }
    const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }
    const std::vector<std::size_t>& neighbors(std::size_t node) const { return adjacency_[node]; }
    bool has_edge(std::size_t a, std::size_t b) const;

private:
    Graph() = default;

    std::size_t node_count_ = 0;
    std::vector<std::pair<std::size_t, std::size_t>> edges_;   // normalized a<b, sorted
    std::vector<std::vector<std::size_t>> adjacency_;          // sorted neighbor lists
};

/// One communication round: a symmetric pairing of the nodes. partner[i] == i
/// means node i stays silent that round (self-loop).
struct Matching {
    std::vector<std::uint8_t> partner;

    bool is_involution() const;
    bool respects(const Graph& graph) const;

    bool operator==(const Matching& other) const { return partner == other.partner; }
    bool operator<(const Matching& other) const { return partner < other.partner; }
};

/// Probability law over matchings of a fixed support graph.
class MatchingDistribution {
public:
    struct Entry {
        Matching matching;
        double weight;
    };

    static MatchingDistribution uniform(Graph graph, std::vector<Matching> matchings);
    static MatchingDistribution explicit_weights(Graph graph, std::vector<Entry> entries);

    const Graph& graph() const { return graph_; }
    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    const Matching& sample(Rng& rng) const;

private:
    explicit MatchingDistribution(Graph graph) : graph_(std::move(graph)) {}
    void finalize();

    Graph graph_;  // owned copy; graphs are small
    std::vector<Entry> entries_;
    std::vector<double> cumulative_;
};

/// The averaged communication matrix: symmetric, doubly stochastic, the
/// transition kernel of the information-propagation chain.
class AveragedMatrix {
public:
    static AveragedMatrix from_entries(std::size_t n, std::vector<double> row_major);

    std::size_t size() const { return n_; }
    double at(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
    const std::vector<double>& data() const { return data_; }

private:
    AveragedMatrix() = default;

    std::size_t n_ = 0;
    std::vector<double> data_;
};

inline constexpr std::size_t enumeration_cap = 12;
inline constexpr double probability_tolerance = 1e-12;

Graph build_graph(std::size_t node_count,
                  const std::vector<std::pair<std::size_t, std::size_t>>& edges);

/// Every edge-respecting involution on the nodes, identity included, in
/// lexicographic order of the partner arrays. Refuses node_count beyond
/// enumeration_cap (the count grows super-exponentially).
std::vector<Matching> enumerate_matchings(const Graph& graph);

MatchingDistribution uniform_distribution(const Graph& graph, std::vector<Matching> matchings);

AveragedMatrix averaged_matrix(const MatchingDistribution& dist);

/// True iff the chain with this kernel has a single communicating class and
/// period 1 (gcd of cycle lengths over the positive-entry pattern).
bool check_irreducible_aperiodic(const AveragedMatrix& a_bar);

} // namespace gossipcd::topology
