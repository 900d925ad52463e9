#include <algorithm>
#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "photherm/io.hpp"
#include "photherm/model.hpp"

using namespace photherm;
using Catch::Approx;
using nlohmann::json;

TEST_CASE("planck occupation frozen values", "[model][planck]") {
    const double kt = thermal_energy(300.0);
    CHECK(planck_occupation(kt * std::log(2.0), 300.0) == Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(planck_occupation(20.0, 300.0) - 0.85644) <= 1e-5);
    CHECK(std::abs(planck_occupation(20.0, 300.0) - static_cast<double>(oracle_ref::planck(20.0L, 300.0L))) <= 1e-14);
    const double small = planck_occupation(0.1, 300.0);
    CHECK(std::abs(small - 258.02) <= 0.01);
    const double series = static_cast<double>(oracle_ref::planck_series(0.1L, 300.0L));
    CHECK(std::abs(small - series) / series <= 1e-9);
    // kT / hw - 1/2 to three digits
    CHECK(std::abs(small - (kt / 0.1 - 0.5)) / small < 1e-3);
}

TEST_CASE("planck occupation rejects non-positive inputs", "[model][planck]") {
    CHECK_THROWS_AS(planck_occupation(0.0, 300.0), DomainError);
    CHECK_THROWS_AS(planck_occupation(-1.0, 300.0), DomainError);
    CHECK_THROWS_AS(planck_occupation(1.0, 0.0), DomainError);
}

TEST_CASE("planck occupation satisfies (1+n)/n = exp(x)", "[model][planck][property]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> logx(std::log(1e-6), std::log(50.0));
    const double t = 300.0;
    for (int i = 0; i < 2000; ++i) {
        const double x = std::exp(logx(rng));
        const double e = x * thermal_energy(t);
        const double n = planck_occupation(e, t);
        const double lhs = (1.0 + n) / n;
        const double rhs = std::exp(e / thermal_energy(t));
        REQUIRE(std::abs(lhs - rhs) / rhs <= 1e-12);
        REQUIRE(n > 0.0);
    }
}

TEST_CASE("planck occupation decreases strictly", "[model][planck][property]") {
    double prev = planck_occupation(1e-3, 300.0);
    for (double e = 2e-3; e < 500.0; e *= 1.3) {
        const double n = planck_occupation(e, 300.0);
        REQUIRE(n < prev);
        prev = n;
    }
}

TEST_CASE("planar dispersion", "[model][dispersion]") {
    const auto single = build_planar_dispersion(2000.0, 1.0, {{0.0, 0.0}}, 0.0, 0.0);
    CHECK(single[0].energy == 2000.0);
    const auto two = build_planar_dispersion(2000.0, 1.0, {{2.0, 0.0}}, 0.0, 0.0);
    CHECK(two[0].energy == 2004.0);

    const auto grid = build_planar_dispersion(2000.0, 1.0, square_k_grid(-5.0, 5.0, 11), 100.0, 0.05);
    REQUIRE(grid.size() == 121);
    CHECK(grid.min_energy() == 2000.0);
    CHECK(grid.max_energy() == 2050.0);
    CHECK(*grid[0].wavevector == Wavevector{0.0, 0.0});
    const auto &top = *grid[120].wavevector;
    CHECK(std::abs(top[0]) == 5.0);
    CHECK(std::abs(top[1]) == 5.0);
    for (std::size_t i = 1; i < grid.size(); ++i) REQUIRE(grid[i - 1].energy <= grid[i].energy);
    REQUIRE(grid.dispersion_meta().has_value());
    CHECK(grid.dispersion_meta()->omega0 == 2000.0);

    // exhaustive: every grid point present with omega0 + |k|^2
    std::multiset<double> expected, got;
    for (const auto &k : square_k_grid(-5.0, 5.0, 11)) expected.insert(2000.0 + k[0] * k[0] + k[1] * k[1]);
    for (const auto &m : grid) got.insert(m.energy);
    CHECK(expected == got);
}

TEST_CASE("planar dispersion is permutation invariant", "[model][dispersion][property]") {
    auto grid = square_k_grid(-3.0, 3.0, 7);
    const auto reference = build_planar_dispersion(1900.0, 2.5, grid, 80.0, 0.1);
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        std::shuffle(grid.begin(), grid.end(), rng);
        const auto shuffled = build_planar_dispersion(1900.0, 2.5, grid, 80.0, 0.1);
        REQUIRE(shuffled.modes() == reference.modes());
    }
}

TEST_CASE("constructors reject invalid inputs", "[model][validation]") {
    CHECK_THROWS_AS(build_planar_dispersion(2000.0, 1.0, {{1.0, 0.0}, {1.0, 0.0}}, 0.0, 0.0), ValidationError);
    CHECK_THROWS_AS(build_planar_dispersion(-1.0, 1.0, {{0.0, 0.0}}, 0.0, 0.0), ValidationError);
    CHECK_THROWS_AS(build_planar_dispersion(2000.0, 1.0, {}, 0.0, 0.0), ValidationError);
    CHECK_THROWS_AS(CavityModeSet({}), ValidationError);
    CHECK_THROWS_AS(CavityModeSet({{0, 2000.0, std::nullopt, 0.0, 0.0}, {0, 2001.0, std::nullopt, 0.0, 0.0}}),
                    ValidationError);
    CHECK_THROWS_AS(CavityModeSet({{0, 0.0, std::nullopt, 0.0, 0.0}}), ValidationError);
    CHECK_THROWS_AS(CavityModeSet({{0, 2000.0, std::nullopt, -1.0, 0.0}}), ValidationError);
    CHECK_THROWS_AS(CavityModeSet({{0, 2000.0, std::nullopt, 0.0, -0.1}}), ValidationError);
    CHECK_THROWS_AS(CavityModeSet({{0, 2000.0, Wavevector{0.0, 0.0}, 0.0, 0.0}, {1, 2001.0, std::nullopt, 0.0, 0.0}}),
                    ValidationError);

    CHECK_THROWS_AS(SpectralProduct::constant(-1.0, 20.0), ValidationError);
    CHECK_THROWS_AS(SpectralProduct::constant(1.0, 0.0), ValidationError);
    CHECK_THROWS_AS(SpectralProduct::tabulated({1.0, 0.5}, {1.0, 1.0}, 20.0), ValidationError);

    VibrationalBath bath;
    bath.temperature = -1.0;
    CHECK_THROWS_AS(bath.validate(), ValidationError);
    bath.temperature = 300.0;
    bath.a2 = -1.0;
    CHECK_THROWS_AS(bath.validate(), ValidationError);

    const auto modes = build_planar_dispersion(2000.0, 1.0, {{0.0, 0.0}}, 100.0, 0.0);
    const auto sp = SpectralProduct::linewidth_estimate(200.0, 20.0);
    CHECK_THROWS_AS(MolecularEnsemble::from_rabi(modes, 0, 2300.0, sp, {}), ValidationError);
    CHECK_THROWS_AS(MolecularEnsemble::from_rabi(modes, 100, 2300.0, sp, {1.0, 10.0, 11.0}), ValidationError);
    CHECK_NOTHROW(MolecularEnsemble::from_rabi(modes, 110, 2300.0, sp, {1.0, 10.0, 11.0}));
    CHECK_THROWS_AS(MolecularEnsemble::from_rabi(modes, 10, 2300.0, sp, {0.0, std::nullopt, std::nullopt}),
                    ValidationError);
}

TEST_CASE("spectral product vanishes above cutoff", "[model][spectral]") {
    const auto c = SpectralProduct::constant(2.0, 20.0);
    CHECK(c(10.0) == 2.0);
    CHECK(c(20.0) == 2.0);
    CHECK(c(20.0001) == 0.0);
    const auto t = SpectralProduct::tabulated({1.0, 3.0}, {2.0, 4.0}, 20.0);
    CHECK(t(2.0) == 3.0);
    CHECK(t(0.5) == 2.0);
    CHECK(t(10.0) == 4.0);
    CHECK(t(25.0) == 0.0);
    const auto e = SpectralProduct::linewidth_estimate(200.0, 20.0);
    CHECK(e.weighted(7.0) == Approx(10.0).epsilon(1e-15));
    CHECK(e.weighted(0.0) == 10.0);
    CHECK(e.weighted(21.0) == 0.0);
}

TEST_CASE("exciton linewidth branches", "[model][linewidth]") {
    VibrationalBath bath;
    bath.a2 = 200.0;
    bath.mlfv_cutoff = 20.0;
    CHECK(exciton_linewidth(bath, 1.0) == Approx(std::sqrt(200.0)).epsilon(1e-15));
    CHECK(std::abs(exciton_linewidth(bath, 1.0) - 14.142) < 1e-3);

    VibrationalBath b2;
    b2.gamma0 = 10.0;
    b2.a2 = 0.0;
    b2.mlfv_cutoff = 20.0;
    CHECK(exciton_linewidth(b2, 50.0) == 10.0);

    VibrationalBath b3;
    b3.gamma0 = 10.0;
    b3.slope_c = 1.0;
    b3.mlfv_cutoff = 20.0;
    CHECK(exciton_linewidth(b3, 300.0) == Approx(20.0).epsilon(1e-15));

    // crossover T* = 20 / kB ~ 232 K; above it without C is a configuration error
    b3.slope_c.reset();
    CHECK_THROWS_AS(exciton_linewidth(b3, 300.0), ConfigurationError);
    const auto branches = linewidth_branches(bath, 300.0);
    CHECK(branches.high_branch_selected);
    CHECK(branches.crossover_temperature == Approx(20.0 / kBoltzmann));
}

TEST_CASE("weak coupling diagnostic", "[model][weak-coupling]") {
    auto one_mode = [](double rabi, double energy) {
        return CavityModeSet({{0, energy, std::nullopt, rabi, 0.0}});
    };
    const auto sp = SpectralProduct::constant(0.0, 20.0);
    VibrationalBath bath;
    bath.gamma0 = 50.0;

    {
        const auto modes = one_mode(0.0, 2000.0);
        const auto ens = MolecularEnsemble::from_rabi(modes, 10, 2200.0, sp, {});
        CHECK(validate_weak_coupling(modes, ens, bath).modes[0].rabi_below_broadening);
    }
    {
        const auto modes = one_mode(100.0, 2000.0);
        const auto ens = MolecularEnsemble::from_rabi(modes, 10, 2200.0, sp, {});
        const auto r = validate_weak_coupling(modes, ens, bath);
        CHECK_FALSE(r.modes[0].rabi_below_broadening);
        CHECK_FALSE(r.passed());
    }
    {
        const auto modes = one_mode(10.0, 2000.0);
        const auto ens = MolecularEnsemble::from_rabi(modes, 10, 2200.0, sp, {});
        const auto r = validate_weak_coupling(modes, ens, bath);
        CHECK(r.passed());
        CHECK(r.modes[0].rabi_margin == Approx(40.0));
        CHECK(r.modes[0].detuning_margin == Approx(150.0));
    }
}

TEST_CASE("model types round-trip through JSON", "[model][io][property]") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Wavevector> grid;
        for (int i = 0; i < 6; ++i) grid.push_back({u(rng) * 10 - 5, u(rng) * 10 - 5});
        const auto modes = build_planar_dispersion(1900 + 200 * u(rng), 0.1 + u(rng), grid, 100 * u(rng), u(rng));
        const auto modes_back = io::cavity_modes_from_json(json::parse(io::cavity_modes_json(modes).dump()));
        REQUIRE(modes_back == modes);

        VibrationalBath bath{100 + 300 * u(rng), 5 + 30 * u(rng), 500 * u(rng), 20 * u(rng), std::nullopt};
        if (trial % 2) bath.slope_c = u(rng);
        REQUIRE(io::bath_from_json(json::parse(io::bath_json(bath).dump())) == bath);

        const auto sp = trial % 3 == 0   ? SpectralProduct::linewidth_estimate(200 * u(rng), bath.mlfv_cutoff)
                         : trial % 3 == 1 ? SpectralProduct::constant(u(rng), bath.mlfv_cutoff)
                                          : SpectralProduct::tabulated({1.0, 2.0 + u(rng)}, {u(rng), u(rng)}, 20.0);
        const auto homog = MolecularEnsemble::from_rabi(modes, 1 + static_cast<std::uint64_t>(1e6 * u(rng)),
                                                        2300.0, sp, {1.0 + u(rng), std::nullopt, std::nullopt});
        REQUIRE(io::ensemble_from_json(json::parse(io::ensemble_json(homog).dump())) == homog);

        std::vector<Molecule> mols;
        for (int m = 0; m < 3; ++m) {
            Molecule mol;
            mol.exciton_energy = 2200 + 200 * u(rng);
            for (int k = 0; k < 6; ++k) {
                mol.couplings.push_back(u(rng));
                mol.phases.push_back(6.28 * u(rng));
            }
            mol.spectral = sp;
            mols.push_back(mol);
        }
        const auto het = MolecularEnsemble::heterogeneous(mols, {});
        REQUIRE(io::ensemble_from_json(json::parse(io::ensemble_json(het).dump())) == het);
    }
}
