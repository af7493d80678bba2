#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

#include "gossipcd/config.hpp"
#include "gossipcd/csv.hpp"
#include "gossipcd/rng.hpp"
#include "gossipcd/error.hpp"

using namespace gossipcd;

namespace {

std::string config_dir() {
    const char* dir = std::getenv("GOSSIPCD_CONFIG_DIR");
    return dir ? dir : "configs";
}

std::string write_temp(const std::string& name, const std::string& text) {
    const std::string path = "/tmp/gossipcd_test_" + name;
    std::ofstream out(path);
    out << text;
    return path;
}

bool fails_with(const char* code, const std::string& fragment, const std::string& path) {
    try {
        config::load_config(path);
    } catch (const Error& e) {
        return e.code() == code && std::string(e.what()).find(fragment) != std::string::npos;
    }
    return false;
}

const char* minimal_template = R"({
  "graph": {"nodes": 2, "edges": [[0, 1]]},
  "sensors": [
    {"pre": {"type": "gaussian", "mean": 0.0, "variance": 1.0}, "post": {"type": "gaussian", "mean": 0.3, "variance": 1.0}},
    {"pre": {"type": "gaussian", "mean": 0.0, "variance": 1.0}, "post": {"type": "gaussian", "mean": 0.5, "variance": 1.0}}
  ],
  "rho": RHO,
  "gamma": 6.0
})";

std::string with_rho(const std::string& rho) {
    std::string text = minimal_template;
    text.replace(text.find("RHO"), 3, rho);
    return text;
}

} // namespace

TEST_CASE("bundled reference config loads and validates") {
    const auto config = config::load_config(config_dir() + "/reference.json");
    CHECK(config.node_count() == 5);
    CHECK(config.matching_dist.size() == 14);
    CHECK(config.rho == 0.1);
    CHECK(config.gamma == 6.0);
    CHECK(config.mode.kind == detector::ModeKind::distributed);
    CHECK(config.mode.sensor == 3);
    CHECK(config.thresholds.size() == 7);
    CHECK(config.trials_per_threshold == 100000);
    const auto kls = config.model.per_sensor_kl();
    CHECK(kls[3] == doctest::Approx(0.125).epsilon(1e-13));
    CHECK(kls[4] == doctest::Approx(0.005).epsilon(1e-13));
}

TEST_CASE("bundled alternates load") {
    CHECK_NOTHROW(config::load_config(config_dir() + "/k5-uniform.json"));
    CHECK_NOTHROW(config::load_config(config_dir() + "/k2.json"));
}

TEST_CASE("defaults are materialized") {
    const auto path = write_temp("defaults.json", with_rho("0.1"));
    const auto config = config::load_config(path);
    CHECK(config.thresholds.size() == 7);  // 10^1 .. 10^4 log-spaced
    CHECK(config.thresholds.front() == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(config.thresholds.back() == doctest::Approx(10000.0).epsilon(1e-12));
    CHECK(config.trials_per_threshold == 100000);
    CHECK(config.max_horizon == 100000);
    CHECK(config.censoring_cap == 0.001);
    CHECK(config.mode.kind == detector::ModeKind::centralized);

    nlohmann::json raw = nlohmann::json::parse(with_rho("0.1"));
    const auto resolved = config::resolved_config_json(raw);
    CHECK(resolved.contains("thresholds"));
    CHECK(resolved.contains("matching_distribution"));
    // resolving is idempotent, so manifests can be re-loaded as configs
    CHECK(config::resolved_config_json(resolved) == resolved);
}

TEST_CASE("validation errors name the violated invariant") {
    CHECK(fails_with("ValidationError", "rho", write_temp("rho1.json", with_rho("1.0"))));
    CHECK(fails_with("ValidationError", "rho", write_temp("rho0.json", with_rho("0.0"))));

    std::string disconnected = with_rho("0.1");
    disconnected.replace(disconnected.find("\"edges\": [[0, 1]]"), 17, "\"edges\": []");
    CHECK(fails_with("ValidationError", "connectivity",
                     write_temp("disc.json", disconnected)));

    std::string indistinct = with_rho("0.1");
    indistinct.replace(indistinct.find("\"mean\": 0.3"), 11, "\"mean\": 0.0");
    CHECK(fails_with("ValidationError", "sensors[0]",
                     write_temp("same.json", indistinct)));
}

TEST_CASE("parse errors carry position information") {
    const auto path = write_temp("broken.json", "{\"graph\": }");
    try {
        config::load_config(path);
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.code() == "ParseError");
    }
}

TEST_CASE("explicit matching distribution entries") {
    const std::string text = R"({
      "graph": {"nodes": 2, "edges": [[0, 1]]},
      "matching_distribution": {"entries": [
        {"partner": [0, 1], "weight": 0.25},
        {"partner": [1, 0], "weight": 0.75}
      ]},
      "sensors": [
        {"pre": {"type": "gaussian", "mean": 0.0, "variance": 1.0}, "post": {"type": "gaussian", "mean": 0.3, "variance": 1.0}},
        {"pre": {"type": "gaussian", "mean": 0.0, "variance": 1.0}, "post": {"type": "gaussian", "mean": 0.5, "variance": 1.0}}
      ],
      "rho": 0.1,
      "gamma": 6.0
    })";
    const auto config = config::load_config(write_temp("explicit.json", text));
    CHECK(config.matching_dist.size() == 2);
    CHECK(config.matching_dist.entries()[1].weight == 0.75);

    std::string bad = text;
    bad.replace(bad.find("0.75"), 4, "0.80");
    CHECK(fails_with("ValidationError", "matching_distribution",
                     write_temp("badweights.json", bad)));
}

TEST_CASE("tabulated densities load from config files") {
    // A discretized standard gaussian against a discretized shifted one.
    std::ostringstream text;
    text << std::setprecision(17);
    auto emit_density = [&](double mean) {
        const std::size_t points = 1601;
        const double x0 = mean - 8.0, dx = 16.0 / (points - 1);
        text << "{\"type\": \"tabulated\", \"x0\": " << x0 << ", \"dx\": " << dx
             << ", \"log_density\": [";
        for (std::size_t i = 0; i < points; ++i) {
            const double x = x0 + dx * i;
            if (i) text << ",";
            text << (-0.5 * (x - mean) * (x - mean) - 0.91893853320467274);
        }
        text << "]}";
    };
    text << R"({"graph": {"nodes": 2, "edges": [[0, 1]]}, "sensors": [{"pre": )";
    emit_density(0.0);
    text << ", \"post\": ";
    emit_density(0.4);
    text << R"(}, {"pre": {"type": "gaussian", "mean": 0.0, "variance": 1.0},
                  "post": {"type": "gaussian", "mean": 0.5, "variance": 1.0}}],
           "rho": 0.1, "gamma": 6.0})";

    const auto config = config::load_config(write_temp("tabulated.json", text.str()));
    const auto kls = config.model.per_sensor_kl();
    CHECK(kls[0] == doctest::Approx(0.08).epsilon(1e-3));  // grid-limited accuracy
    CHECK(kls[1] == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("csv doubles round-trip through 17 significant digits") {
    CHECK(format_double(1.0 / 3.0) == "0.33333333333333331");
    CHECK(format_double(10000.0) == "10000");
    CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
    Rng rng = make_rng(404, 0);
    std::uniform_real_distribution<double> draw(-1e6, 1e6);
    for (int rep = 0; rep < 200; ++rep) {
        const double x = draw(rng);
        CHECK(std::stod(format_double(x)) == x);  // bit-exact round trip
    }
}

TEST_CASE("missing required fields") {
    CHECK(fails_with("ValidationError", "sensors",
                     write_temp("nosensors.json",
                                R"({"graph": {"nodes": 2, "edges": [[0,1]]}, "rho": 0.1, "gamma": 1.0})")));
}
