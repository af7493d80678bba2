// Exercises the installed CLI end to end: exit codes, CSV layouts, byte-level
// determinism, and manifest round-trips. Paths come from the environment
// (GOSSIPCD_BIN, GOSSIPCD_CONFIG_DIR), set by ctest.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

std::string bin() {
    const char* b = std::getenv("GOSSIPCD_BIN");
    REQUIRE(b != nullptr);
    return b;
}

std::string config_dir() {
    const char* d = std::getenv("GOSSIPCD_CONFIG_DIR");
    REQUIRE(d != nullptr);
    return d;
}

int run(const std::string& args) {
    const std::string cmd = bin() + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::path("/tmp") / ("gossipcd_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::size_t line_count(const std::string& text) {
    std::size_t lines = 0;
    for (char c : text)
        if (c == '\n') ++lines;
    return lines;
}

std::string first_line(const std::string& text) {
    return text.substr(0, text.find('\n'));
}

} // namespace

TEST_CASE("validate exits zero on the bundled configs") {
    CHECK(run("validate " + config_dir() + "/reference.json") == 0);
    CHECK(run("validate " + config_dir() + "/k5-uniform.json") == 0);
    CHECK(run("validate " + config_dir() + "/k2.json") == 0);
}

TEST_CASE("usage errors exit with code 2") {
    CHECK(run("no-such-subcommand") == 2);
    CHECK(run("") == 2);
    CHECK(run("first-layer " + config_dir() + "/k2.json -o /tmp/gossipcd_cli_noseed") == 2);
    CHECK(run("gossip-stats " + config_dir() + "/k2.json --method mc -o /tmp/x") == 2);
}

TEST_CASE("runtime errors exit with code 1 and a single-line code") {
    const auto dir = fresh_dir("badcfg");
    std::ofstream bad(dir / "bad.json");
    bad << R"({"graph": {"nodes": 3, "edges": []}, "sensors": [], "rho": 0.1, "gamma": 1})";
    bad.close();
    const std::string cmd =
        bin() + " validate " + (dir / "bad.json").string() + " 2> " + (dir / "err.txt").string();
    const int status = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(status) == 1);
    const std::string err = slurp(dir / "err.txt");
    CHECK(err.rfind("error[ValidationError]", 0) == 0);
    CHECK(line_count(err) == 1);
}

TEST_CASE("bounds sweep emits the documented CSV") {
    const auto dir = fresh_dir("bounds");
    CHECK(run("bounds " + config_dir() + "/reference.json -o " + dir.string() + " --L 2..15") == 0);
    const std::string csv = slurp(dir / "bounds.csv");
    CHECK(first_line(csv) == "L,alpha,beta,upper_rate,lower_rate");
    CHECK(line_count(csv) == 15);  // header + 14 rows

    // K5 keeps L = 1 (every pair adjacent): full 15-row sweep
    const auto dir5 = fresh_dir("bounds5");
    CHECK(run("bounds " + config_dir() + "/k5-uniform.json -o " + dir5.string() + " --L 1..15") ==
          0);
    CHECK(line_count(slurp(dir5 / "bounds.csv")) == 16);
}

TEST_CASE("gossip-stats exact and mc layouts") {
    const auto dir = fresh_dir("gstats");
    CHECK(run("gossip-stats " + config_dir() + "/k2.json -o " + dir.string()) == 0);
    const std::string csv = slurp(dir / "gossip-stats.csv");
    CHECK(first_line(csv) == "gamma,subset_mask,probability,method,stderr");
    CHECK(line_count(csv) == 5);  // header + 4 masks

    CHECK(run("gossip-stats " + config_dir() + "/k2.json -o " + dir.string() +
              " --method mc --trials 2000 --seed 7") == 0);
    const std::string mc = slurp(dir / "gossip-stats.csv");
    CHECK(line_count(mc) == 5);
    CHECK(mc.find("mc") != std::string::npos);
}

TEST_CASE("csv outputs are byte-identical across reruns and worker counts") {
    const auto dir1 = fresh_dir("det1");
    const auto dir2 = fresh_dir("det2");
    const std::string base = "first-layer " + config_dir() + "/k2.json --seed 31415 ";
    CHECK(run(base + "--threads 1 -o " + dir1.string()) == 0);
    CHECK(run(base + "--threads 4 -o " + dir2.string()) == 0);
    CHECK(slurp(dir1 / "first-layer.csv") == slurp(dir2 / "first-layer.csv"));
    CHECK(slurp(dir1 / "decay-fits.csv") == slurp(dir2 / "decay-fits.csv"));

    const auto dir3 = fresh_dir("det3");
    const auto dir4 = fresh_dir("det4");
    const std::string sl = "second-layer " + config_dir() + "/reference.json --gammas 20..30 ";
    CHECK(run(sl + "-o " + dir3.string()) == 0);
    CHECK(run(sl + "-o " + dir4.string()) == 0);
    CHECK(slurp(dir3 / "second-layer.csv") == slurp(dir4 / "second-layer.csv"));

    const auto dir5 = fresh_dir("det5");
    const auto dir6 = fresh_dir("det6");
    const std::string gs =
        "gossip-stats " + config_dir() + "/reference.json --method mc --trials 20000 --seed 99 ";
    CHECK(run(gs + "--threads 1 -o " + dir5.string()) == 0);
    CHECK(run(gs + "--threads 3 -o " + dir6.string()) == 0);
    CHECK(slurp(dir5 / "gossip-stats.csv") == slurp(dir6 / "gossip-stats.csv"));
}

TEST_CASE("manifest round-trips reproduce outputs byte for byte") {
    const auto dir = fresh_dir("manifest");
    CHECK(run("first-layer " + config_dir() + "/k2.json --seed 2718 -o " + dir.string()) == 0);

    const auto manifest = nlohmann::json::parse(slurp(dir / "first-layer-manifest.json"));
    CHECK(manifest["tool"] == "gossipcd");
    CHECK(manifest["subcommand"] == "first-layer");
    CHECK(manifest["master_seed"] == 2718);
    REQUIRE(manifest.contains("config"));

    // the embedded resolved config is itself a loadable config file
    const auto rerun_dir = fresh_dir("manifest_rerun");
    const fs::path cfg = rerun_dir / "from-manifest.json";
    std::ofstream out(cfg);
    out << manifest["config"].dump(2);
    out.close();
    const auto seed = manifest["master_seed"].get<std::uint64_t>();
    CHECK(run("first-layer " + cfg.string() + " --seed " + std::to_string(seed) + " -o " +
              rerun_dir.string()) == 0);
    CHECK(slurp(dir / "first-layer.csv") == slurp(rerun_dir / "first-layer.csv"));
    CHECK(slurp(dir / "decay-fits.csv") == slurp(rerun_dir / "decay-fits.csv"));
}

TEST_CASE("kl-sweep emits the documented columns") {
    const auto dir = fresh_dir("klsweep");
    CHECK(run("kl-sweep " + config_dir() + "/reference.json -o " + dir.string() +
              " --gammas 0..5") == 0);
    const std::string csv = slurp(dir / "kl-sweep.csv");
    CHECK(first_line(csv) == "gamma,owner,exact_dkl,thm4_lower,thm4_upper,centralized_kl");
    CHECK(line_count(csv) == 7);
}
