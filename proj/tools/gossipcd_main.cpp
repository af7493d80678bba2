#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gossipcd/config.hpp"
#include "gossipcd/csv.hpp"
#include "gossipcd/error.hpp"
#include "gossipcd/experiments.hpp"
#include "gossipcd/markov.hpp"
#include "gossipcd/version.hpp"

namespace {

using namespace gossipcd;
namespace fs = std::filesystem;

// "lo..hi" (integers) or a comma list of numbers
std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> out;
    try {
        const auto dots = text.find("..");
        if (dots != std::string::npos) {
            const long lo = std::stol(text.substr(0, dots));
            const long hi = std::stol(text.substr(dots + 2));
            if (hi < lo) fail(errc::invalid_argument, "grid '" + text + "' is empty");
            for (long v = lo; v <= hi; ++v) out.push_back(static_cast<double>(v));
            return out;
        }
        std::size_t pos = 0;
        while (pos < text.size()) {
            const auto comma = text.find(',', pos);
            const std::string tok =
                text.substr(pos, comma == std::string::npos ? comma : comma - pos);
            out.push_back(std::stod(tok));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    } catch (const std::logic_error&) {
        fail(errc::invalid_argument, "cannot parse grid '" + text + "'");
    }
    if (out.empty()) fail(errc::invalid_argument, "grid '" + text + "' is empty");
    return out;
}

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::size_t threads = 0;
    std::optional<std::size_t> owner;
};

experiments::ExperimentConfig load(const CommonArgs& args) {
    auto config = config::load_config(args.config_path);
    if (args.seed) config.master_seed = *args.seed;
    config.threads = args.threads;
    if (args.owner) {
        if (*args.owner >= config.node_count())
            fail(errc::out_of_range, "--owner out of range");
        config.mode = detector::Mode::distributed(*args.owner);
    }
    return config;
}

nlohmann::json raw_config_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(errc::io_error, "cannot open config file " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        fail(errc::parse_error, std::string("config ") + path + ": " + e.what());
    }
}

void finish_manifest(const CommonArgs& args, const std::string& subcommand,
                     const nlohmann::json& flags, const std::vector<std::string>& outputs,
                     const std::vector<std::string>& warnings = {}) {
    config::ManifestInfo info;
    info.subcommand = subcommand;
    info.resolved_config = config::resolved_config_json(raw_config_json(args.config_path));
    info.has_seed = args.seed.has_value();
    info.master_seed = args.seed.value_or(0);
    info.flags = flags;
    info.outputs = outputs;
    info.warnings = warnings;
    config::write_manifest((fs::path(args.out_dir) / (subcommand + "-manifest.json")).string(),
                           info);
}

std::string out_path(const CommonArgs& args, const std::string& name) {
    fs::create_directories(args.out_dir);
    return (fs::path(args.out_dir) / name).string();
}

int cmd_validate(const CommonArgs& args) {
    auto config = load(args);
    config.validate();
    std::cout << "ok: " << args.config_path << " (" << config.node_count() << " nodes, "
              << config.matching_dist.size() << " matchings)\n";
    return 0;
}

int cmd_bounds(const CommonArgs& args, const std::string& window_grid) {
    auto config = load(args);
    const std::size_t target = args.owner ? *args.owner : experiments::resolve_owner(config);
    const auto a_bar = topology::averaged_matrix(config.matching_dist);

    std::vector<std::string> warnings;
    CsvWriter csv(out_path(args, "bounds.csv"), {"L", "alpha", "beta", "upper_rate", "lower_rate"});
    for (double Ld : parse_grid(window_grid)) {
        const auto L = static_cast<std::size_t>(Ld);
        try {
            const auto bp = markov::bound_params(a_bar, target, L);
            csv.row({CsvWriter::cell(L), CsvWriter::cell(bp.alpha), CsvWriter::cell(bp.beta),
                     CsvWriter::cell(bp.upper_rate), CsvWriter::cell(bp.lower_rate)});
        } catch (const Error& e) {
            if (e.code() != std::string(errc::degenerate_bound)) throw;
            warnings.push_back("L=" + std::to_string(L) + " skipped: " + e.what());
            std::cerr << "warning: " << e.what() << " (row skipped)\n";
        }
    }
    finish_manifest(args, "bounds", {{"L", window_grid}, {"target", target}}, {"bounds.csv"},
                    warnings);
    return 0;
}

int cmd_gossip_stats(const CommonArgs& args, double gamma_flag, const std::string& method,
                     std::size_t trials) {
    auto config = load(args);
    const std::size_t owner = args.owner ? *args.owner : experiments::resolve_owner(config);
    const double gamma = gamma_flag >= 0.0 ? gamma_flag : config.gamma;

    gossip::SubsetDistribution sd = [&] {
        if (method == "exact")
            return gossip::subset_distribution_exact(config.matching_dist, gamma, owner);
        if (method != "mc") fail(errc::invalid_argument, "--method must be exact or mc");
        Rng rng = make_rng(config.master_seed, 0x90551b);
        return gossip::subset_distribution_mc(config.matching_dist, gamma, owner, trials, rng);
    }();
    if (sd.truncation_mass > 0.0)
        std::cerr << "info: Poisson truncation mass " << format_double(sd.truncation_mass)
                  << " folded into the last computed round\n";

    CsvWriter csv(out_path(args, "gossip-stats.csv"),
                  {"gamma", "subset_mask", "probability", "method", "stderr"});
    for (std::size_t mask = 0; mask < sd.probs.size(); ++mask) {
        std::string se;
        if (method == "mc") {
            const double p = sd.probs[mask];
            se = format_double(std::sqrt(p * (1.0 - p) / static_cast<double>(trials)));
        }
        csv.row({CsvWriter::cell(gamma), CsvWriter::cell(mask), CsvWriter::cell(sd.probs[mask]),
                 method, se});
    }
    finish_manifest(args, "gossip-stats",
                    {{"gamma", gamma}, {"owner", owner}, {"method", method}, {"trials", trials}},
                    {"gossip-stats.csv"});
    return 0;
}

int cmd_second_layer(const CommonArgs& args, const std::string& gamma_grid, std::size_t window,
                     std::size_t mc_trials) {
    auto config = load(args);
    const auto rows =
        experiments::second_layer_curve(config, parse_grid(gamma_grid), window, mc_trials);
    CsvWriter csv(out_path(args, "second-layer.csv"),
                  {"gamma", "incomplete_probability", "curve", "lower_rate", "upper_rate",
                   "method"});
    for (const auto& r : rows)
        csv.row({CsvWriter::cell(r.gamma), CsvWriter::cell(r.incomplete), CsvWriter::cell(r.curve),
                 CsvWriter::cell(r.lower_rate), CsvWriter::cell(r.upper_rate), r.method});
    finish_manifest(args, "second-layer", {{"gammas", gamma_grid}, {"L", window}},
                    {"second-layer.csv"});
    return 0;
}

int cmd_kl_sweep(const CommonArgs& args, const std::string& gamma_grid, std::size_t window) {
    auto config = load(args);
    const auto rows = experiments::kl_convergence_sweep(config, parse_grid(gamma_grid), window);
    CsvWriter csv(out_path(args, "kl-sweep.csv"),
                  {"gamma", "owner", "exact_dkl", "thm4_lower", "thm4_upper", "centralized_kl"});
    for (const auto& r : rows)
        csv.row({CsvWriter::cell(r.gamma), CsvWriter::cell(r.owner), CsvWriter::cell(r.exact_dkl),
                 CsvWriter::cell(r.thm4_lower), CsvWriter::cell(r.thm4_upper),
                 CsvWriter::cell(r.centralized_kl)});
    finish_manifest(args, "kl-sweep", {{"gammas", gamma_grid}, {"L", window}}, {"kl-sweep.csv"});
    return 0;
}

struct ModeRun {
    std::string name;
    std::size_t sensor;
    detector::Mode mode;
    double target_kl;
};

int cmd_first_layer(const CommonArgs& args, bool all_modes) {
    auto config = load(args);
    if (!args.seed)
        fail(errc::invalid_argument, "first-layer requires an explicit --seed");

    const auto kls = config.model.per_sensor_kl();
    const double centralized_kl = std::accumulate(kls.begin(), kls.end(), 0.0);

    std::vector<ModeRun> runs;
    auto mode_name = [](const detector::Mode& m) {
        switch (m.kind) {
        case detector::ModeKind::centralized: return std::string("centralized");
        case detector::ModeKind::isolated: return std::string("isolated");
        case detector::ModeKind::distributed: return std::string("distributed");
        }
        return std::string("?");
    };
    auto target_for = [&](const detector::Mode& m) {
        switch (m.kind) {
        case detector::ModeKind::centralized: return centralized_kl;
        case detector::ModeKind::isolated: return kls[m.sensor];
        case detector::ModeKind::distributed:
            try {
                const auto sd = gossip::subset_distribution_exact(config.matching_dist,
                                                                  config.gamma, m.sensor);
                return obsmodel::distributed_kl(sd, kls);
            } catch (const Error& e) {
                if (e.code() != std::string(errc::too_large)) throw;
                std::cerr << "warning: exact distributed KL infeasible for sensor " << m.sensor
                          << "; target_rate reported as nan\n";
                return std::numeric_limits<double>::quiet_NaN();
            }
        }
        return 0.0;
    };
    if (all_modes) {
        runs.push_back({"centralized", 0, detector::Mode::centralized(), 0.0});
        for (std::size_t i = 0; i < config.node_count(); ++i)
            runs.push_back({"isolated", i, detector::Mode::isolated(i), 0.0});
        for (std::size_t i = 0; i < config.node_count(); ++i)
            runs.push_back({"distributed", i, detector::Mode::distributed(i), 0.0});
    } else {
        runs.push_back({mode_name(config.mode), config.mode.sensor, config.mode, 0.0});
    }
    for (auto& r : runs) r.target_kl = target_for(r.mode);

    const double prior_rate = -std::log1p(-config.rho);  // |log(1-rho)|
    std::vector<std::string> warnings;

    CsvWriter points_csv(out_path(args, "first-layer.csv"),
                         {"mode", "sensor", "A", "cadd1", "cadd1_se", "pfa", "pfa_se", "ln_pfa"});
    CsvWriter fits_csv(out_path(args, "decay-fits.csv"),
                       {"mode", "sensor", "slope", "stderr", "target_rate"});

    for (const auto& run : runs) {
        experiments::ExperimentConfig run_config = config;
        run_config.mode = run.mode;
        const auto est = experiments::estimate_pfa_cadd(run_config);
        for (const auto& w : est.warnings) {
            warnings.push_back(run.name + "[" + std::to_string(run.sensor) + "]: " + w);
            std::cerr << "warning: " << warnings.back() << "\n";
        }
        for (const auto& p : est.points) {
            if (!p.has_pfa) continue;
            points_csv.row({run.name, CsvWriter::cell(run.sensor), CsvWriter::cell(p.threshold),
                            CsvWriter::cell(p.cadd1), CsvWriter::cell(p.cadd1_se),
                            CsvWriter::cell(p.pfa), CsvWriter::cell(p.pfa_se),
                            CsvWriter::cell(p.log_pfa)});
            if (p.add_trials > 0)
                std::cout << "info: " << run.name << "[" << run.sensor << "] A=" << p.threshold
                          << " ADD=" << p.add << " (se " << p.add_se << ", " << p.add_trials
                          << " detections)\n";
        }
        try {
            const auto fit = experiments::fit_decay_rate(est.points);
            fits_csv.row({run.name, CsvWriter::cell(run.sensor), CsvWriter::cell(fit.slope),
                          CsvWriter::cell(fit.slope_stderr),
                          CsvWriter::cell(-(run.target_kl + prior_rate))});
        } catch (const Error& e) {
            if (e.code() != std::string(errc::degenerate_fit)) throw;
            warnings.push_back(run.name + "[" + std::to_string(run.sensor) +
                               "]: " + e.what());
            std::cerr << "warning: no decay fit for " << run.name << "[" << run.sensor
                      << "]: " << e.what() << "\n";
        }
    }

    finish_manifest(args, "first-layer", {{"all_modes", all_modes}},
                    {"first-layer.csv", "decay-fits.csv"}, warnings);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    std::setvbuf(stdout, nullptr, _IOLBF, 1 << 14);
    CLI::App app{"Distributed Bayesian quickest change detection over gossip networks"};
    app.set_version_flag("--version", std::string(gossipcd::version));
    app.require_subcommand(1);

    CommonArgs args;
    std::string window_grid = "1..15";
    std::string gamma_grid_sl = "20..60";
    std::string gamma_grid_kl = "0..60";
    double gamma_flag = -1.0;
    std::string method = "exact";
    std::size_t trials = 100000;
    std::size_t window = 15;
    std::size_t mc_trials = 0;
    bool all_modes = false;

    auto add_common = [&](CLI::App* cmd, bool with_owner = true) {
        cmd->add_option("config", args.config_path, "config file (JSON)")->required();
        cmd->add_option("-o,--out", args.out_dir, "output directory");
        cmd->add_option("--seed", args.seed, "master seed (64-bit)");
        cmd->add_option("--threads", args.threads, "worker threads (0 = all cores)");
        if (with_owner) cmd->add_option("--owner", args.owner, "sensor whose view to analyze");
    };

    auto* validate = app.add_subcommand("validate", "load a config and run the invariant suite");
    add_common(validate, false);

    auto* bounds = app.add_subcommand("bounds", "hitting-time bound parameters per window L");
    add_common(bounds);
    bounds->add_option("--L", window_grid, "window grid, e.g. 1..15");

    auto* gossip_stats = app.add_subcommand("gossip-stats", "subset distribution q-bar");
    add_common(gossip_stats);
    gossip_stats->add_option("--gamma", gamma_flag, "mean rounds (default: config gamma)");
    gossip_stats->add_option("--method", method, "exact or mc")
        ->check(CLI::IsMember({"exact", "mc"}));
    gossip_stats->add_option("--trials", trials, "Monte Carlo trials (mc only)");

    auto* second_layer = app.add_subcommand("second-layer", "missing-observation decay curve vs bound lines");
    add_common(second_layer);
    second_layer->add_option("--gammas", gamma_grid_sl, "gamma grid, e.g. 20..60");
    second_layer->add_option("--L", window, "bound window");
    second_layer->add_option("--mc-trials", mc_trials,
                             "fallback Monte Carlo trials when exact is infeasible");

    auto* kl_sweep = app.add_subcommand("kl-sweep", "distributed KL number vs convergence bounds");
    add_common(kl_sweep);
    kl_sweep->add_option("--gammas", gamma_grid_kl, "gamma grid, e.g. 0..60");
    kl_sweep->add_option("--L", window, "bound window");

    auto* first_layer =
        app.add_subcommand("first-layer", "Monte Carlo PFA/CADD estimates and decay-rate fits");
    add_common(first_layer, false);
    first_layer->add_flag("--all-modes", all_modes,
                          "run centralized, every isolated and every distributed sensor");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForVersion") {
            return app.exit(e);
        }
        std::cerr << "error[Usage] " << e.what() << "\n";
        std::cerr << app.help() << "\n";
        return 2;
    }

    try {
        if (validate->parsed()) return cmd_validate(args);
        if (bounds->parsed()) return cmd_bounds(args, window_grid);
        if (gossip_stats->parsed()) {
            if (method == "mc" && !args.seed)
                fail(gossipcd::errc::invalid_argument, "gossip-stats --method mc requires --seed");
            return cmd_gossip_stats(args, gamma_flag, method, trials);
        }
        if (second_layer->parsed()) {
            if (mc_trials > 0 && !args.seed)
                fail(gossipcd::errc::invalid_argument, "--mc-trials requires --seed");
            return cmd_second_layer(args, gamma_grid_sl, window, mc_trials);
        }
        if (kl_sweep->parsed()) return cmd_kl_sweep(args, gamma_grid_kl, window);
        if (first_layer->parsed()) return cmd_first_layer(args, all_modes);
        std::cerr << "error[Usage] no subcommand\n";
        return 2;
    } catch (const gossipcd::Error& e) {
        std::cerr << e.what() << "\n";
        return e.code() == std::string(gossipcd::errc::invalid_argument) ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error[Internal] " << e.what() << "\n";
        return 1;
    }
}
