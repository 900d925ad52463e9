#include <catch2/catch_amalgamated.hpp>

#include "photherm/config.hpp"

using namespace photherm;
using namespace photherm::config;

namespace {

const char *kMinimal = R"({
  "modes": {"list": [{"id": 0, "energy": 2000.0, "rabi": 10.0}]},
  "ensemble": {"n_mol": 1000, "exciton_energy": 2300.0},
  "bath": {"temperature": 300.0, "a2": 200.0}
})";

bool has_issue(const ParseResult &r, ConfigIssue::Kind kind, const std::string &path) {
    for (const auto &i : r.issues)
        if (i.kind == kind && i.path == path) return true;
    return false;
}

} // namespace

TEST_CASE("minimal config parses with defaults", "[config]") {
    const auto r = parse_config(kMinimal);
    REQUIRE(r.ok());
    const auto &c = *r.config;
    REQUIRE(c.modes);
    CHECK(c.modes->size() == 1);
    CHECK(c.bath->mlfv_cutoff == 20.0);
    CHECK(c.bath->gamma0 == 0.0);
    CHECK_FALSE(c.bath->slope_c.has_value());
    CHECK(c.ensemble->molecule_size_nm == 1.0);
    CHECK(c.ensemble->spectral.kind == "linewidth_estimate");
    CHECK(c.assembly.source == RateSource::Estimate);
    CHECK(c.assembly.regularization.mode == DegenerateMode::FloorKeepKms);
    CHECK(c.format == "csv");
    CHECK_FALSE(c.seed.has_value());
    const auto ens = build_ensemble(c);
    CHECK(ens.n_mol() == 1000);
    CHECK(ens.molecules()[0].couplings[0] == Catch::Approx(10.0 / std::sqrt(1000.0)).epsilon(1e-15));
}

TEST_CASE("negative temperature is one schema error naming the key", "[config]") {
    std::string text = kMinimal;
    const std::string key = "\"temperature\": 300.0";
    text.replace(text.find(key), key.size(), "\"temperature\": -300.0");
    const auto r = parse_config(text);
    REQUIRE(r.issues.size() == 1);
    CHECK(r.issues[0].kind == ConfigIssue::Kind::Schema);
    CHECK(r.issues[0].path == "bath.temperature");
}

TEST_CASE("inconsistent molecule count is a physics error", "[config]") {
    const auto r = parse_config(R"({
      "modes": {"list": [{"id": 0, "energy": 2000.0}]},
      "ensemble": {"n_mol": 1000, "concentration": 100.0, "area": 2.0, "exciton_energy": 2300.0},
      "bath": {"temperature": 300.0, "a2": 200.0}
    })");
    REQUIRE_FALSE(r.ok());
    CHECK(has_issue(r, ConfigIssue::Kind::Physics, "ensemble"));
}

TEST_CASE("syntax errors report line and column", "[config]") {
    const auto r = parse_config("{\n  \"modes\": {\n    \"list\": [1, 2,,]\n  }\n}\n");
    REQUIRE(r.issues.size() == 1);
    CHECK(r.issues[0].kind == ConfigIssue::Kind::Syntax);
    CHECK(r.issues[0].line == 3);
    CHECK(r.issues[0].column > 1);
}

TEST_CASE("all errors are collected", "[config]") {
    const auto r = parse_config(R"({
      "modes": {"list": [{"id": 0, "energy": -5.0, "colour": "red"}]},
      "ensemble": {"n_mol": 0, "exciton_energy": 2300.0},
      "bath": {"temperature": 300.0, "a2": "lots"},
      "rates": {"policy": "guess"},
      "frobnicate": true
    })");
    CHECK(has_issue(r, ConfigIssue::Kind::Schema, "modes.list[0].energy"));
    CHECK(has_issue(r, ConfigIssue::Kind::Schema, "modes.list[0].colour"));
    CHECK(has_issue(r, ConfigIssue::Kind::Schema, "ensemble.n_mol"));
    CHECK(has_issue(r, ConfigIssue::Kind::Schema, "bath.a2"));
    CHECK(has_issue(r, ConfigIssue::Kind::Schema, "rates.policy"));
    CHECK(has_issue(r, ConfigIssue::Kind::Schema, "frobnicate"));
    CHECK(r.issues.size() == 6);
}

TEST_CASE("comments are accepted", "[config]") {
    const std::string text = std::string("// scenario\n/* block */\n") + kMinimal;
    CHECK(parse_config(text).ok());
}

TEST_CASE("dispersion and explicit molecules", "[config]") {
    const auto r = parse_config(R"({
      "modes": {"dispersion": {"omega0": 2000, "alpha_cav": 1, "grid": {"k_min": -1, "k_max": 1, "n": 3}, "rabi": 50}},
      "ensemble": {"molecules": [
        {"exciton_energy": 2300, "couplings": [1, 2, 3, 4, 5, 6, 7, 8, 9]},
        {"exciton_energy": 2310, "couplings": [1, 2, 3, 4, 5, 6, 7, 8, 9], "spectral_product": {"kind": "constant", "value": 1e-4}}
      ]},
      "bath": {"temperature": 300, "a2": 200},
      "rates": {"policy": "microscopic", "degenerate": {"mode": "zero", "epsilon": 0.05}, "k_bound": 50}
    })");
    REQUIRE(r.ok());
    const auto &c = *r.config;
    CHECK(c.modes->size() == 9);
    CHECK(c.modes->has_wavevectors());
    CHECK(c.assembly.regularization.mode == DegenerateMode::Zero);
    CHECK(*c.assembly.regularization.epsilon == 0.05);
    CHECK(*c.assembly.k_bound == 50.0);
    const auto ens = build_ensemble(c);
    CHECK(ens.n_mol() == 2);
    CHECK_FALSE(ens.is_homogeneous());
    CHECK(ens.molecules()[1].spectral.kind() == SpectralProduct::Kind::Constant);
    CHECK(ens.molecules()[0].spectral.kind() == SpectralProduct::Kind::LinewidthEstimate);
}

TEST_CASE("explicit molecules need a coupling for every mode", "[config]") {
    const auto r = parse_config(R"({
      "modes": {"list": [{"id": 0, "energy": 2000}, {"id": 3, "energy": 2005}]},
      "ensemble": {"molecules": [{"exciton_energy": 2300, "couplings": [1, 2]}]},
      "bath": {"temperature": 300, "a2": 200}
    })");
    CHECK(has_issue(r, ConfigIssue::Kind::Physics, "ensemble.molecules[0].couplings"));
}

TEST_CASE("disorder sampling is seeded", "[config]") {
    const std::string text = R"({
      "modes": {"list": [{"id": 0, "energy": 2000, "rabi": 10}, {"id": 1, "energy": 2010, "rabi": 10}]},
      "ensemble": {"n_mol": 50, "exciton_energy": 2300, "disorder": {"exciton_sigma": 5}},
      "bath": {"temperature": 300, "a2": 200}
    })";
    const auto c = parse_config_or_throw(text);
    CHECK_THROWS_AS(build_ensemble(c), ConfigurationError);
    const auto a = build_ensemble(c, std::nullopt, std::nullopt, 42);
    const auto b = build_ensemble(c, std::nullopt, std::nullopt, 42);
    const auto other = build_ensemble(c, std::nullopt, std::nullopt, 43);
    CHECK(a == b);
    CHECK_FALSE(a == other);
    CHECK(a.n_mol() == 50);
    CHECK(std::abs(a.mean_exciton_energy() - 2300.0) < 5.0);
}

TEST_CASE("parse_config_or_throw carries every issue", "[config]") {
    try {
        parse_config_or_throw(R"({"bath": {"temperature": -1, "a2": -2}})");
        FAIL("expected ConfigError");
    } catch (const ConfigError &e) {
        CHECK(e.issues().size() == 2);
    }
}
