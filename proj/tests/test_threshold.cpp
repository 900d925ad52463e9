#include <catch2/catch_amalgamated.hpp>

#include "photherm/threshold.hpp"

using namespace photherm;
using Catch::Approx;

namespace {

struct Scenario {
    CavityModeSet modes;
    VibrationalBath bath;
};

Scenario small_planar(double loss = 0.05) {
    VibrationalBath b;
    b.a2 = 200.0;
    return {build_planar_dispersion(2000.0, 1.0, square_k_grid(-2.0, 2.0, 5), 100.0, loss), b};
}

Eigen::VectorXd losses(const CavityModeSet &modes, double factor = 1.0) {
    Eigen::VectorXd l(static_cast<Eigen::Index>(modes.size()));
    for (std::size_t i = 0; i < modes.size(); ++i) l(static_cast<Eigen::Index>(i)) = factor * rate_to_inverse_ps(modes[i].loss);
    return l;
}

} // namespace

TEST_CASE("power-law fit", "[threshold][fit]") {
    const auto exact = fit_power_law({1, 2, 4, 8}, {3.0, 1.5, 0.75, 0.375});
    REQUIRE(exact.exponent);
    CHECK(*exact.exponent == Approx(-1.0).epsilon(1e-14));
    CHECK(*exact.prefactor == Approx(3.0).epsilon(1e-14));
    CHECK(*exact.r_squared == Approx(1.0).epsilon(1e-14));
    const auto single = fit_power_law({1.0}, {2.0});
    CHECK_FALSE(single.exponent.has_value());
    CHECK_FALSE(single.r_squared.has_value());
}

TEST_CASE("threshold is invariant under joint rescaling of rates and losses", "[threshold][property]") {
    const auto s = small_planar();
    const auto ens = MolecularEnsemble::from_rabi(s.modes, 100000, 2300.0,
                                                  SpectralProduct::linewidth_estimate(200.0, 20.0), {});
    const auto rm = assemble_rate_matrix(s.modes, ens, s.bath);
    ThresholdCriterion crit;
    crit.pumped_modes = 4;
    const auto base = find_threshold(rm, losses(s.modes), crit);
    const auto doubled = find_threshold(rm.scaled(2.0), losses(s.modes, 2.0), crit);
    REQUIRE(base.threshold);
    REQUIRE(doubled.threshold);
    CHECK(base.converged);
    CHECK(*doubled.threshold == Approx(*base.threshold).epsilon(1e-5));
}

TEST_CASE("threshold condition holds at the reported pump", "[threshold]") {
    const auto s = small_planar();
    const auto ens = MolecularEnsemble::from_rabi(s.modes, 100000, 2300.0,
                                                  SpectralProduct::linewidth_estimate(200.0, 20.0), {});
    const auto rm = assemble_rate_matrix(s.modes, ens, s.bath);
    ThresholdCriterion crit;
    crit.pumped_modes = 4;
    const auto point = find_threshold(rm, losses(s.modes), crit);
    REQUIRE(point.threshold);
    auto fraction = [&](double p) {
        const auto ss = steady_state(rm, threshold_drive(losses(s.modes), 4, p));
        REQUIRE(ss.converged);
        return ss.state.occupations(0) / ss.state.occupations.sum();
    };
    CHECK(fraction(*point.threshold) >= crit.fraction);
    CHECK(fraction(*point.threshold * (1.0 - 1e-4)) < crit.fraction);
}

TEST_CASE("unbracketed threshold is reported as not found", "[threshold]") {
    const auto s = small_planar();
    const auto rm = RateMatrix::zeros(s.modes, 300.0);
    ThresholdCriterion crit;
    crit.pumped_modes = 4;
    crit.pump_max = 1e3;
    const auto point = find_threshold(rm, losses(s.modes), crit);
    CHECK_FALSE(point.threshold.has_value());
    CHECK_FALSE(point.converged);
}

TEST_CASE("threshold scan rows and fit", "[threshold][scan]") {
    const auto s = small_planar();
    const auto sp = SpectralProduct::linewidth_estimate(200.0, 20.0);
    const EnsembleFactory factory = [&](std::uint64_t n, double area) {
        return MolecularEnsemble::from_rabi(s.modes, n, 2300.0, sp, {1.0, 1e5, area});
    };
    ThresholdCriterion crit;
    crit.pumped_modes = 4;

    const auto one = threshold_scan(s.modes, factory, s.bath, 1e5, {2.0}, crit);
    REQUIRE(one.rows.size() == 1);
    CHECK(one.rows[0].n_mol == 200000);
    CHECK_FALSE(one.fit.exponent.has_value());

    const auto scan = threshold_scan(s.modes, factory, s.bath, 1e5, {1.0, 2.0, 4.0}, crit);
    REQUIRE(scan.rows.size() == 3);
    for (const auto &r : scan.rows) CHECK(r.converged);
    REQUIRE(scan.fit.exponent.has_value());
    CHECK(*scan.fit.r_squared > 0.99);
}
