#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "photherm/io.hpp"

using namespace photherm;
using nlohmann::json;

TEST_CASE("17-digit formatting round-trips", "[io][property]") {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::uint64_t> bits;
    for (int i = 0; i < 20000; ++i) {
        std::uint64_t b = bits(rng);
        double x;
        std::memcpy(&x, &b, sizeof x);
        if (!std::isfinite(x)) continue;
        REQUIRE(std::strtod(io::format_double(x).c_str(), nullptr) == x);
    }
}

TEST_CASE("fnv1a reference values", "[io]") {
    CHECK(io::fnv1a_hex("") == "cbf29ce484222325");
    CHECK(io::fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(io::fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("csv parsing", "[io]") {
    const auto t = io::parse_csv("a,b\n1,2.5\n-3,1e-300\n");
    CHECK(t.header == std::vector<std::string>{"a", "b"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[1][1] == 1e-300);
    CHECK_THROWS_AS(io::parse_csv("a,b\n1\n"), ValidationError);
    CHECK_THROWS_AS(io::parse_csv("a\nx\n"), ValidationError);
}

TEST_CASE("trajectory exports round-trip", "[io][property]") {
    Trajectory traj;
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int s = 0; s < 5; ++s) {
        Eigen::VectorXd n(3);
        for (auto &x : n) x = u(rng);
        traj.samples.push_back({n, 0.1 * s + u(rng) * 1e-3});
    }
    const std::vector<int> ids = {4, 7, 9};
    const auto csv = io::parse_csv(io::trajectory_csv(traj, ids));
    CHECK(csv.header == std::vector<std::string>{"time_ps", "n_4", "n_7", "n_9", "N_total"});
    for (std::size_t s = 0; s < traj.samples.size(); ++s) {
        CHECK(csv.rows[s][0] == traj.samples[s].time);
        for (int a = 0; a < 3; ++a) CHECK(csv.rows[s][static_cast<std::size_t>(a) + 1] == traj.samples[s].occupations(a));
        CHECK(csv.rows[s][4] == traj.samples[s].total());
    }
    const auto j = json::parse(io::trajectory_json(traj, ids).dump());
    for (std::size_t s = 0; s < traj.samples.size(); ++s) {
        const auto occ = j["samples"][s]["occupations"].get<std::vector<double>>();
        for (int a = 0; a < 3; ++a) CHECK(occ[static_cast<std::size_t>(a)] == traj.samples[s].occupations(a));
    }
}

TEST_CASE("threshold scan export marks missing thresholds", "[io]") {
    ThresholdScanResult scan;
    scan.rows.push_back({1.0, 100, 2.5, true});
    scan.rows.push_back({2.0, 200, std::nullopt, false});
    const auto csv = io::threshold_scan_csv(scan);
    CHECK(csv == "area_um2,N_mol,threshold_pump,converged\n1,100,2.5,1\n2,200,nan,0\n");
    const auto j = io::threshold_scan_json(scan);
    CHECK(j["rows"][1]["threshold_pump"].is_null());
    CHECK(j["exponent"].is_null());
}
