#include "gossipcd/config.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <utility>

#include "gossipcd/error.hpp"
#include "gossipcd/version.hpp"

namespace gossipcd::config {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
    fail(errc::validation_error, field + ": " + what);
}

const json& require(const json& doc, const std::string& field) {
    const auto it = doc.find(field);
    if (it == doc.end()) invalid(field, "missing required field");
    return *it;
}

double require_number(const json& doc, const std::string& field) {
    const json& v = require(doc, field);
    if (!v.is_number()) invalid(field, "expected a number");
    return v.get<double>();
}

std::size_t require_uint(const json& doc, const std::string& field) {
    const json& v = require(doc, field);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        invalid(field, "expected a nonnegative integer");
    return v.get<std::size_t>();
}

obsmodel::Density parse_density(const json& doc, const std::string& field) {
    if (!doc.is_object()) invalid(field, "expected an object");
    const std::string type = require(doc, "type").get<std::string>();
    if (type == "gaussian") {
        return obsmodel::Gaussian{require_number(doc, "mean"), require_number(doc, "variance")};
    }
    if (type == "tabulated") {
        obsmodel::Tabulated t;
        t.x0 = require_number(doc, "x0");
        t.dx = require_number(doc, "dx");
        const json& values = require(doc, "log_density");
        if (!values.is_array()) invalid(field, "log_density must be an array");
        t.log_density = values.get<std::vector<double>>();
        return t;
    }
    invalid(field, "unknown density type '" + type + "'");
}

std::vector<double> default_thresholds() {
    // A = 10^1, 10^1.5, ..., 10^4
    std::vector<double> out;
    for (int i = 2; i <= 8; ++i) out.push_back(std::pow(10.0, 0.5 * static_cast<double>(i)));
    return out;
}

} // namespace

json resolved_config_json(const json& doc) {
    json out = doc;
    if (!out.contains("thresholds")) out["thresholds"] = default_thresholds();
    if (!out.contains("trials_per_threshold")) out["trials_per_threshold"] = 100000;
    if (!out.contains("max_horizon")) out["max_horizon"] = 100000;
    if (!out.contains("censoring_cap")) out["censoring_cap"] = 0.001;
    if (!out.contains("matching_distribution")) out["matching_distribution"] = "uniform_enumerated";
    if (!out.contains("mode")) out["mode"] = {{"type", "centralized"}};
    return out;
}

experiments::ExperimentConfig config_from_json(const json& raw) {
    const json doc = resolved_config_json(raw);

    const json& graph_doc = require(doc, "graph");
    const std::size_t nodes = require_uint(graph_doc, "nodes");
    const json& edges_doc = require(graph_doc, "edges");
    if (!edges_doc.is_array()) invalid("graph.edges", "expected an array of pairs");
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& e : edges_doc) {
        if (!e.is_array() || e.size() != 2) invalid("graph.edges", "each edge must be a pair");
        edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
    }
    topology::Graph graph = [&] {
        try {
            return topology::build_graph(nodes, edges);
        } catch (const Error& err) {
            if (err.code() == std::string(errc::disconnected_graph))
                invalid("connectivity", err.what());
            invalid("graph", err.what());
        }
    }();

    const json& dist_doc = require(doc, "matching_distribution");
    auto dist = [&]() -> topology::MatchingDistribution {
        if (dist_doc.is_string()) {
            if (dist_doc.get<std::string>() != "uniform_enumerated")
                invalid("matching_distribution",
                        "expected \"uniform_enumerated\" or an explicit entry list");
            return topology::uniform_distribution(graph, topology::enumerate_matchings(graph));
        }
        if (!dist_doc.is_object() || !dist_doc.contains("entries"))
            invalid("matching_distribution", "expected an object with an entries array");
        std::vector<topology::MatchingDistribution::Entry> entries;
        for (const auto& e : dist_doc["entries"]) {
            topology::Matching m;
            for (const auto& p : require(e, "partner"))
                m.partner.push_back(p.get<std::uint8_t>());
            entries.push_back({std::move(m), require_number(e, "weight")});
        }
        try {
            return topology::MatchingDistribution::explicit_weights(graph, std::move(entries));
        } catch (const Error& err) {
            invalid("matching_distribution", err.what());
        }
    }();

    const json& sensors_doc = require(doc, "sensors");
    if (!sensors_doc.is_array()) invalid("sensors", "expected an array");
    std::vector<obsmodel::SensorDensityPair> sensors;
    for (std::size_t i = 0; i < sensors_doc.size(); ++i) {
        const json& s = sensors_doc[i];
        const std::string field = "sensors[" + std::to_string(i) + "]";
        try {
            sensors.push_back(obsmodel::SensorDensityPair::create(
                parse_density(require(s, "pre"), field + ".pre"),
                parse_density(require(s, "post"), field + ".post")));
        } catch (const Error& err) {
            invalid(field, err.what());
        }
    }

    const double rho = require_number(doc, "rho");
    if (!(rho > 0.0) || !(rho < 1.0)) invalid("rho", "must lie strictly inside (0,1)");
    const double gamma = require_number(doc, "gamma");
    if (gamma < 0.0) invalid("gamma", "must be nonnegative");

    const json& mode_doc = require(doc, "mode");
    const std::string mode_type = require(mode_doc, "type").get<std::string>();
    detector::Mode mode;
    if (mode_type == "centralized") {
        mode = detector::Mode::centralized();
    } else if (mode_type == "isolated") {
        mode = detector::Mode::isolated(require_uint(mode_doc, "sensor"));
    } else if (mode_type == "distributed") {
        mode = detector::Mode::distributed(require_uint(mode_doc, "sensor"));
    } else {
        invalid("mode", "unknown mode '" + mode_type + "'");
    }

    experiments::ExperimentConfig config{
        std::move(dist),
        obsmodel::ObservationModel(std::move(sensors)),
        rho,
        gamma,
        mode,
        require(doc, "thresholds").get<std::vector<double>>(),
        require_uint(doc, "trials_per_threshold"),
        require_uint(doc, "max_horizon"),
        require_number(doc, "censoring_cap"),
        0,
        0};
    try {
        config.validate();
    } catch (const Error& err) {
        // already a ValidationError naming the invariant
        throw;
    }
    return config;
}

experiments::ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(errc::io_error, "cannot open config file " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        fail(errc::parse_error, std::string("config ") + path + ": " + e.what());
    }
    return config_from_json(doc);
}

void write_manifest(const std::string& path, const ManifestInfo& info) {
    json doc;
    doc["tool"] = "gossipcd";
    doc["version"] = version;
    doc["subcommand"] = info.subcommand;
    const auto now = std::chrono::system_clock::now();
    doc["timestamp_unix"] =
        std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    doc["config"] = info.resolved_config;
    if (info.has_seed) doc["master_seed"] = info.master_seed;
    doc["flags"] = info.flags;
    doc["outputs"] = info.outputs;
    doc["warnings"] = info.warnings;
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(errc::io_error, "cannot write manifest " + path);
    out << doc.dump(2) << "\n";
}

} // namespace gossipcd::config
