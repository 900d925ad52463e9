#include <filesystem>
#include <fstream>
#include <sstream>

#include <catch2/catch_amalgamated.hpp>

#include "photherm/cli.hpp"

using namespace photherm;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string &name) {
    const auto dir = fs::temp_directory_path() / ("photherm_cli_test_" + name);
    fs::remove_all(dir);
    return dir;
}

cli::RunResult run(const std::string &sub, const std::string &config, const fs::path &out,
                   std::optional<std::string> format = {}) {
    cli::RunRequest req;
    req.subcommand = sub;
    req.config_text = config;
    req.out_dir = out;
    req.format = format;
    return cli::run_subcommand(req);
}

const char *kTwoMode = R"({
  "modes": {"list": [{"id": 0, "energy": 2000.0, "rabi": 100.0}, {"id": 1, "energy": 2010.0, "rabi": 100.0}]},
  "ensemble": {"n_mol": 1000, "exciton_energy": 2300.0},
  "bath": {"temperature": 300.0, "a2": 200.0},
  "evolve": {"t_final": 100.0, "sample_every": 1.0, "initial": {"kind": "single_mode", "mode_id": 1, "n_total": 1.0}},
  "equilibrium": {"n_total": 2.0},
  "oracle": {"mode_ids": [0, 1], "cutoff": 6, "t_final": 2.0, "samples": 5}
})";

} // namespace

TEST_CASE("rates on a two-mode config", "[cli]") {
    const auto dir = fresh_dir("rates");
    const auto r = run("rates", kTwoMode, dir);
    REQUIRE(r.exit_code == 0);
    CHECK(r.files == std::vector<std::string>{"rates.csv", "manifest.json"});
    const auto parsed = io::parse_rate_matrix_csv(read(dir / "rates.csv"));
    CHECK(parsed.mode_ids == std::vector<int>{0, 1});
    CHECK(parsed.gamma(0, 1) > parsed.gamma(1, 0));

    const auto manifest = json::parse(read(dir / "manifest.json"));
    CHECK(manifest["tool"] == "photherm");
    CHECK(manifest["version"] == cli::kToolVersion);
    CHECK(manifest["config_fnv1a64"] == io::fnv1a_hex(kTwoMode));
    CHECK(manifest["files"][0]["fnv1a64"] == io::fnv1a_hex(read(dir / "rates.csv")));

    const auto j = run("rates", kTwoMode, dir, "json");
    REQUIRE(j.exit_code == 0);
    const auto back = io::rate_matrix_from_json(json::parse(read(dir / "rates.json")));
    CHECK(back.gamma() == parsed.gamma);
}

TEST_CASE("evolve writes a 101-row trajectory", "[cli]") {
    const auto dir = fresh_dir("evolve");
    const auto r = run("evolve", kTwoMode, dir);
    REQUIRE(r.exit_code == 0);
    const auto t = io::parse_csv(read(dir / "trajectory.csv"));
    CHECK(t.rows.size() == 101);
    CHECK(t.rows.back()[0] == 100.0);
    CHECK(t.header.back() == "N_total");
}

TEST_CASE("outputs are byte-identical across runs", "[cli][property]") {
    for (const std::string sub : {"rates", "evolve", "equilibrium", "oracle-check"}) {
        const auto a = fresh_dir(sub + "_a"), b = fresh_dir(sub + "_b");
        REQUIRE(run(sub, kTwoMode, a).exit_code == 0);
        REQUIRE(run(sub, kTwoMode, b).exit_code == 0);
        for (const auto &entry : fs::directory_iterator(a))
            CHECK(read(entry.path()) == read(b / entry.path().filename()));
    }
}

TEST_CASE("equilibrium outputs", "[cli]") {
    const auto dir = fresh_dir("equilibrium");
    REQUIRE(run("equilibrium", kTwoMode, dir).exit_code == 0);
    const auto t = io::parse_csv(read(dir / "equilibrium.csv"));
    REQUIRE(t.rows.size() == 2);
    CHECK(std::abs(t.rows[0][2] + t.rows[1][2] - 2.0) < 1e-10);
    const auto s = json::parse(read(dir / "equilibrium_summary.json"));
    CHECK(s["chemical_potential_meV"].get<double>() < 2000.0);
}

TEST_CASE("oracle-check reports conservation", "[cli]") {
    const auto dir = fresh_dir("oracle");
    REQUIRE(run("oracle-check", kTwoMode, dir).exit_code == 0);
    const auto rep = json::parse(read(dir / "oracle_report.json"));
    CHECK(rep["max_trace_drift"].get<double>() <= 1e-10);
    CHECK(rep["max_number_drift"].get<double>() <= 1e-10);
    CHECK(rep["finite_difference"]["max_abs_error"].get<double>() <= 1e-6);
    CHECK(rep["dimension"] == 49);
}

TEST_CASE("exit codes", "[cli]") {
    const auto dir = fresh_dir("errors");
    CHECK(run("rates", "{ not json", dir).exit_code == cli::kExitConfig);
    CHECK(run("launch", kTwoMode, dir).exit_code == cli::kExitConfig);

    const auto missing = run("threshold-scan", kTwoMode, dir);
    CHECK(missing.exit_code == cli::kExitConfig);
    REQUIRE_FALSE(missing.messages.empty());
    CHECK(missing.messages[0].find("threshold_scan") != std::string::npos);

    // resonant explicit molecule: numerical failure
    const auto resonant = run("rates", R"({
      "modes": {"list": [{"id": 0, "energy": 2000.0}, {"id": 1, "energy": 2010.0}]},
      "ensemble": {"molecules": [{"exciton_energy": 2010.0, "couplings": [1.0, 1.0]}]},
      "bath": {"temperature": 300.0, "a2": 200.0},
      "rates": {"policy": "microscopic"}
    })", dir);
    CHECK(resonant.exit_code == cli::kExitNumerical);
}

TEST_CASE("bundled sample configs run", "[cli]") {
    const fs::path configs = PHOTHERM_CONFIG_DIR;
    const auto dir = fresh_dir("samples");
    CHECK(run("rates", read(configs / "planar_121.json"), dir).exit_code == 0);
    CHECK(run("equilibrium", read(configs / "planar_121.json"), dir).exit_code == 0);
    CHECK(run("rates", read(configs / "heterogeneous.json"), dir).exit_code == 0);
    CHECK(run("oracle-check", read(configs / "oracle_two_mode.json"), dir).exit_code == 0);
    CHECK(run("threshold-scan", read(configs / "threshold_scan.json"), dir).exit_code == 0);
}
