#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "gossipcd/error.hpp"
#include "gossipcd/markov.hpp"
#include "gossipcd/rng.hpp"
#include "gossipcd/topology.hpp"

using namespace gossipcd;
using namespace gossipcd::topology;
using namespace gossipcd::markov;

namespace {

// Independent oracle: the literal path sum over all length-h trajectories
// that avoid the target. Exponential in h, fine for the sizes used here.
double tail_path_sum(const AveragedMatrix& a, std::size_t target, std::size_t from,
                     std::size_t horizon) {
    if (horizon == 0) return from == target ? 0.0 : 1.0;
    std::function<double(std::size_t, std::size_t)> walk = [&](std::size_t at,
                                                               std::size_t steps) -> double {
        if (steps == 0) return 1.0;
        double acc = 0.0;
        for (std::size_t next = 0; next < a.size(); ++next) {
            if (next == target) continue;
            const double p = a.at(at, next);
            if (p > 0.0) acc += p * walk(next, steps - 1);
        }
        return acc;
    };
    return walk(from, horizon);
}

AveragedMatrix kernel_of(const Graph& g) {
    return averaged_matrix(uniform_distribution(g, enumerate_matchings(g)));
}

Graph k2() { return build_graph(2, {{0, 1}}); }
Graph path3() { return build_graph(3, {{0, 1}, {1, 2}}); }

Graph kite5() {
    return build_graph(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {1, 2}, {1, 3}, {2, 3}});
}

bool expect_error(const char* code, const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code() == code;
    }
    return false;
}

} // namespace

TEST_CASE("K2 hitting tails halve per step") {
    const auto a = kernel_of(k2());
    CHECK(hitting_tail(a, 0, 1).at(1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(hitting_tail(a, 0, 2).at(1) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(hitting_tail(a, 0, 10).at(1) == doctest::Approx(std::pow(0.5, 10)).epsilon(1e-12));
}

TEST_CASE("horizon zero gives tails of one") {
    const auto a = kernel_of(path3());
    const auto t = hitting_tail(a, 1, 0);
    CHECK(t.at(0) == 1.0);
    CHECK(t.at(2) == 1.0);
}

TEST_CASE("path3 tails at horizon 2 match the path-sum oracle") {
    const auto a = kernel_of(path3());
    const auto t = hitting_tail(a, 0, 2);
    // hand value: from state 2, avoid 0 for two steps = 1/3*2/3 + 2/3*1
    CHECK(t.at(2) == doctest::Approx(8.0 / 9.0).epsilon(1e-14));
    CHECK(t.at(1) == doctest::Approx(5.0 / 9.0).epsilon(1e-14));
    CHECK(t.at(1) == doctest::Approx(tail_path_sum(a, 0, 1, 2)).epsilon(1e-13));
    CHECK(t.at(2) == doctest::Approx(tail_path_sum(a, 0, 2, 2)).epsilon(1e-13));
}

TEST_CASE("taboo powers equal the path-sum oracle on small graphs") {
    Rng seed_rng(123);
    const Graph graphs[] = {k2(), path3(), kite5(),
                            build_graph(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}})};
    for (const auto& g : graphs) {
        const auto a = kernel_of(g);
        for (std::size_t target = 0; target < g.node_count(); ++target) {
            for (std::size_t h = 0; h <= 4; ++h) {
                const auto t = hitting_tail(a, target, h);
                for (std::size_t j = 0; j < g.node_count(); ++j) {
                    if (j == target) continue;
                    CHECK(t.at(j) ==
                          doctest::Approx(tail_path_sum(a, target, j, h)).epsilon(1e-12));
                }
            }
        }
    }
}

TEST_CASE("tails are non-increasing in the horizon") {
    const auto a = kernel_of(kite5());
    for (std::size_t target = 0; target < 5; ++target) {
        std::vector<double> prev(5, 1.0);
        for (std::size_t h = 1; h <= 30; ++h) {
            const auto t = hitting_tail(a, target, h);
            for (std::size_t j = 0; j < 5; ++j) {
                if (j == target) continue;
                CHECK(t.at(j) <= prev[j] + 1e-15);
                prev[j] = t.at(j);
            }
        }
    }
}

TEST_CASE("hitting tails agree with chain simulation") {
    const auto a = kernel_of(kite5());
    const std::size_t target = 3;
    const std::size_t chains = 20000;
    const std::size_t max_h = 8;

    // Simulate the kernel directly.
    std::vector<std::vector<std::size_t>> survive(5, std::vector<std::size_t>(max_h + 1, 0));
    Rng rng = make_rng(77, 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t j = 0; j < 5; ++j) {
        if (j == target) continue;
        for (std::size_t c = 0; c < chains; ++c) {
            std::size_t at = j;
            for (std::size_t h = 1; h <= max_h; ++h) {
                double u = unit(rng);
                std::size_t next = 0;
                for (; next + 1 < 5; ++next) {
                    if (u < a.at(at, next)) break;
                    u -= a.at(at, next);
                }
                at = next;
                if (at == target) break;
                ++survive[j][h];
            }
        }
    }
    for (std::size_t j = 0; j < 5; ++j) {
        if (j == target) continue;
        for (std::size_t h = 1; h <= max_h; ++h) {
            const double phat =
                static_cast<double>(survive[j][h]) / static_cast<double>(chains);
            const double p = hitting_tail(a, target, h).at(j);
            const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / chains);
            CHECK(std::abs(phat - p) <= 3.5 * se);
        }
    }
}

TEST_CASE("hitting_tail requires an irreducible kernel") {
    const auto identity = averaged_matrix(
        MatchingDistribution::explicit_weights(k2(), {{Matching{{0, 1}}, 1.0}}));
    CHECK(expect_error("NotIrreducible", [&] { hitting_tail(identity, 0, 3); }));
}

TEST_CASE("bound_params on K2") {
    const auto a = kernel_of(k2());
    const auto bp = bound_params(a, 0, 1);
    CHECK(bp.alpha == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(bp.beta == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(bp.upper_rate == doctest::Approx(std::log(0.5)).epsilon(1e-14));
    CHECK(bp.lower_rate == doctest::Approx(std::log(0.5)).epsilon(1e-14));
    CHECK_FALSE(bp.degenerate());
}

TEST_CASE("bound_params error paths") {
    const auto identity = averaged_matrix(
        MatchingDistribution::explicit_weights(k2(), {{Matching{{0, 1}}, 1.0}}));
    CHECK(expect_error("NotIrreducible", [&] { bound_params(identity, 0, 1); }));

    const auto swap = averaged_matrix(
        MatchingDistribution::explicit_weights(k2(), {{Matching{{1, 0}}, 1.0}}));
    CHECK(expect_error("NotIrreducible", [&] { bound_params(swap, 0, 1); }));  // period 2

    // Node 4 cannot reach node 3 in one round on the kite: alpha would be 1.
    const auto kite = kernel_of(kite5());
    CHECK(expect_error("DegenerateBound", [&] { bound_params(kite, 3, 1); }));
    CHECK(expect_error("OutOfRange", [&] { bound_params(kite, 3, 0); }));
}

TEST_CASE("beta underflow reports the explicit minus-infinity sentinel") {
    // Path 0-1-2-3 with target 1 and a skewed matching law: the taboo matrix
    // splits into a fast block {0} (tail 0.2^L, flushes to exact zero) and a
    // slow block {2,3} (tail ~ 0.95^L, still positive), so beta hits zero
    // while alpha stays representable.
    const Graph p4 = build_graph(4, {{0, 1}, {1, 2}, {2, 3}});
    const auto dist = MatchingDistribution::explicit_weights(
        p4, {{Matching{{0, 1, 2, 3}}, 0.1},
             {Matching{{0, 2, 1, 3}}, 0.1},
             {Matching{{1, 0, 3, 2}}, 0.8}});
    const auto bp = bound_params(averaged_matrix(dist), 1, 1200);
    CHECK(bp.beta == 0.0);
    CHECK(bp.alpha > 0.0);
    CHECK_FALSE(bp.has_lower_rate());
    CHECK(bp.lower_rate == -std::numeric_limits<double>::infinity());
    CHECK(bp.degenerate());
}

TEST_CASE("path3 bounds at L=2 from the oracle") {
    const auto a = kernel_of(path3());
    const auto bp = bound_params(a, 0, 2);
    CHECK(bp.alpha == doctest::Approx(8.0 / 9.0).epsilon(1e-14));
    CHECK(bp.beta == doctest::Approx(5.0 / 9.0).epsilon(1e-14));
    CHECK(bp.upper_rate == doctest::Approx(std::log(8.0 / 9.0) / 2).epsilon(1e-13));
    CHECK(bp.lower_rate == doctest::Approx(std::log(5.0 / 9.0) / 2).epsilon(1e-13));
}

TEST_CASE("bounds_vs_window on K2 is flat") {
    const auto a = kernel_of(k2());
    const auto rows = bounds_vs_window(a, 0, {1, 2, 3});
    REQUIRE(rows.size() == 3);
    for (const auto& bp : rows) {
        CHECK(bp.upper_rate == doctest::Approx(std::log(0.5)).epsilon(1e-13));
        CHECK(bp.lower_rate == doctest::Approx(std::log(0.5)).epsilon(1e-13));
    }
    CHECK(bounds_vs_window(a, 0, {1}).size() == 1);
}

TEST_CASE("kite bound gap narrows with the window") {
    const auto a = kernel_of(kite5());
    std::vector<std::size_t> windows;
    for (std::size_t L = 2; L <= 15; ++L) windows.push_back(L);
    const auto rows = bounds_vs_window(a, 3, windows);
    REQUIRE(rows.size() == 14);
    double prev_gap = std::numeric_limits<double>::infinity();
    for (const auto& bp : rows) {
        const double gap = bp.upper_rate - bp.lower_rate;
        CHECK(gap > 0.0);
        CHECK(gap < prev_gap);
        prev_gap = gap;
    }
    // frozen endpoints (independent prototype implementation)
    const auto& last = rows.back();
    CHECK(last.alpha == doctest::Approx(0.272065108391678).epsilon(1e-12));
    CHECK(last.beta == doctest::Approx(0.0990221538402557).epsilon(1e-12));
    CHECK(last.upper_rate == doctest::Approx(-0.0867809248162198).epsilon(1e-12));
    CHECK(last.lower_rate == doctest::Approx(-0.1541607785145).epsilon(1e-11));
}

TEST_CASE("window-multiple tails respect the geometric envelopes") {
    // tail(kL) <= alpha^k and tail(kL) >= beta^k, k = 1..5
    const Graph graphs[] = {k2(), path3(), kite5()};
    for (const auto& g : graphs) {
        const auto a = kernel_of(g);
        for (std::size_t target = 0; target < g.node_count(); ++target) {
            for (std::size_t L : {2, 5}) {
                const auto bp = bound_params(a, target, L);
                for (std::size_t k = 1; k <= 5; ++k) {
                    const auto t = hitting_tail(a, target, k * L);
                    for (std::size_t j = 0; j < g.node_count(); ++j) {
                        if (j == target) continue;
                        CHECK(t.at(j) <= std::pow(bp.alpha, k) * (1 + 1e-12));
                        CHECK(t.at(j) >= std::pow(bp.beta, k) * (1 - 1e-12));
                    }
                }
            }
        }
    }
}
