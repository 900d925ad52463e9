#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "photherm/equilibrium.hpp"
#include "photherm/kinetics.hpp"
#include "photherm/rates.hpp"

using namespace photherm;
using Catch::Approx;

namespace {

RateMatrix two_mode_pair(double down_mev, double gap = 10.0, double t = 300.0) {
    Eigen::MatrixXd g(2, 2);
    g << 0.0, down_mev, kms_complete(down_mev, gap, t), 0.0;
    return RateMatrix(g, {0, 1}, {2000.0, 2000.0 + gap}, t);
}

RateMatrix random_kms_matrix(std::mt19937_64 &rng, int m) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> e;
    for (int i = 0; i < m; ++i) e.push_back(2000.0 + 30.0 * u(rng));
    std::sort(e.begin(), e.end());
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m, m);
    for (int a = 0; a < m; ++a)
        for (int b = a + 1; b < m; ++b) {
            if (u(rng) < 0.2) continue;
            const double down = 1e-2 * u(rng);
            g(a, b) = down;
            g(b, a) = kms_complete(down, e[b] - e[a], 300.0);
        }
    std::vector<int> ids(m);
    for (int i = 0; i < m; ++i) ids[i] = i;
    return RateMatrix(g, ids, e, 300.0);
}

} // namespace

TEST_CASE("thermalization rhs basics", "[kinetics][rhs]") {
    const auto rm = two_mode_pair(0.01);
    CHECK(thermalization_rhs({Eigen::VectorXd::Zero(2), 0.0}, rm).isZero(0.0));
    CHECK_THROWS_AS(thermalization_rhs({Eigen::VectorXd::Zero(3), 0.0}, rm), ContractError);

    // Bose-Einstein with any mu is a fixed point
    for (double mu : {1500.0, 1990.0, 1999.999}) {
        const auto n = bose_einstein(rm.energies(), mu, 300.0);
        const auto rhs = thermalization_rhs({n, 0.0}, rm);
        const double scale = thermalization_term_scale({n, 0.0}, rm);
        CHECK(rhs.cwiseAbs().maxCoeff() <= 1e-13 * scale);
    }
}

TEST_CASE("thermalization rhs against the pairwise reference", "[kinetics][rhs][property]") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const auto rm = random_kms_matrix(rng, 2 + trial % 12);
        Eigen::VectorXd n(static_cast<Eigen::Index>(rm.size()));
        for (auto &x : n) x = 100.0 * u(rng) * u(rng);
        const auto rhs = thermalization_rhs({n, 0.0}, rm);
        const auto ref = oracle_ref::mean_field_rhs(n, rm.gamma());
        long double total = 0.0L;
        const double scale = thermalization_term_scale({n, 0.0}, rm);
        for (Eigen::Index a = 0; a < n.size(); ++a) {
            REQUIRE(std::abs(rhs(a) - static_cast<double>(ref[static_cast<std::size_t>(a)])) <= 1e-13 * scale);
            total += rhs(a);
        }
        REQUIRE(std::abs(static_cast<double>(total)) <= 1e-14 * scale);
    }
}

TEST_CASE("drive terms", "[kinetics][drive]") {
    const auto rm = two_mode_pair(0.01);
    const KineticState s{Eigen::Vector2d(1.0, 2.0), 0.0};
    const auto none = DriveSpec::none(2);
    CHECK(full_rhs(s, rm, none) == thermalization_rhs(s, rm));

    // single mode, no partner: n = P / loss
    const RateMatrix single(Eigen::MatrixXd::Zero(1, 1), {0}, {2000.0}, 300.0);
    DriveSpec d = DriveSpec::none(1);
    d.pump(0) = 0.3;
    d.loss(0) = 0.05;
    d.pump_enabled = d.loss_enabled = true;
    const auto ss = steady_state(single, d);
    CHECK(ss.converged);
    CHECK(ss.state.occupations(0) == Approx(6.0).epsilon(1e-12));

    DriveSpec bad = DriveSpec::none(1);
    bad.loss(0) = -1.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("loss-only decay follows the exponential", "[kinetics][integrate]") {
    const auto rm = two_mode_pair(0.05);
    DriveSpec d = DriveSpec::none(2);
    d.loss.setConstant(0.2);
    d.loss_enabled = true;
    IntegrationOptions opts;
    opts.t_final = 5.0 / 0.2;
    const auto traj = integrate({Eigen::Vector2d(3.0, 1.0), 0.0}, rm, d, opts);
    const double want = 4.0 * std::exp(-5.0);
    CHECK(std::abs(traj.final_state().total() - want) / want < 1e-6);
}

TEST_CASE("zero rates leave the state constant", "[kinetics][integrate]") {
    const RateMatrix zero(Eigen::MatrixXd::Zero(3, 3), {0, 1, 2}, {2000.0, 2001.0, 2002.0}, 300.0);
    IntegrationOptions opts;
    opts.t_final = 10.0;
    opts.sample_interval = 1.0;
    const Eigen::Vector3d n0(1.0, 2.0, 3.0);
    const auto traj = integrate({n0, 0.0}, zero, DriveSpec::none(3), opts);
    REQUIRE(traj.samples.size() == 11);
    for (const auto &s : traj.samples) CHECK(s.occupations == n0);
    CHECK(traj.samples.back().time == 10.0);
}

TEST_CASE("two-mode relaxation reaches the chemical-potential solution", "[kinetics][integrate]") {
    const auto rm = two_mode_pair(0.05, 10.0);
    IntegrationOptions opts;
    opts.t_final = 2000.0;
    const auto traj = integrate({Eigen::Vector2d(0.0, 1.0), 0.0}, rm, DriveSpec::none(2), opts);
    const auto eq = solve_chemical_potential(rm.energies(), 300.0, 1.0);
    for (Eigen::Index a = 0; a < 2; ++a)
        CHECK(std::abs(traj.final_state().occupations(a) - eq.occupations(a)) <= 1e-6 * eq.occupations(a));

    // the closed-system steady state agrees with long-time integration
    const auto ss = steady_state(rm, DriveSpec::none(2), 1.0);
    CHECK((ss.state.occupations - traj.final_state().occupations).cwiseAbs().maxCoeff() <= 1e-6);

    // independent check: mu from the long-double bisection
    const long double mu = oracle_ref::solve_mu(rm.energies(), 300.0L, 1.0L);
    CHECK(std::abs(static_cast<double>(mu) - eq.chemical_potential) < 1e-9);
}

TEST_CASE("closed steady state", "[kinetics][steady]") {
    const RateMatrix single(Eigen::MatrixXd::Zero(1, 1), {0}, {2000.0}, 300.0);
    CHECK(steady_state(single, DriveSpec::none(1), 3.0).state.occupations(0) == Approx(3.0).epsilon(1e-12));
    CHECK_THROWS_AS(steady_state(single, DriveSpec::none(1)), ContractError);
    const RateMatrix split(Eigen::MatrixXd::Zero(2, 2), {0, 1}, {2000.0, 2030.0}, 300.0);
    CHECK_THROWS_AS(steady_state(split, DriveSpec::none(2), 1.0), ContractError);
}

TEST_CASE("sampling cadence and clipping", "[kinetics][integrate]") {
    const auto rm = two_mode_pair(0.05);
    IntegrationOptions opts;
    opts.t_final = 100.0;
    opts.sample_interval = 1.0;
    const auto traj = integrate({Eigen::Vector2d(0.5, 0.5), 0.0}, rm, DriveSpec::none(2), opts);
    REQUIRE(traj.samples.size() == 101);
    for (std::size_t i = 0; i < traj.samples.size(); ++i) CHECK(traj.samples[i].time == Approx(static_cast<double>(i)).margin(1e-12));
    CHECK(traj.min_occupation >= -opts.abs_tol);
    CHECK(traj.clip_events.empty());
}

TEST_CASE("free energy decreases along relaxation", "[kinetics][property]") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const auto rm = random_kms_matrix(rng, 6);
        Eigen::VectorXd n0(6);
        for (auto &x : n0) x = 5.0 * u(rng);
        const double mu = solve_chemical_potential(rm.energies(), 300.0, n0.sum()).chemical_potential;
        double prev = free_energy(n0, rm.energies(), 300.0, mu);
        IntegrationOptions opts;
        opts.t_final = 500.0;
        bool monotone = true;
        opts.on_step = [&](double, const Eigen::VectorXd &n) {
            const double f = free_energy(n, rm.energies(), 300.0, mu);
            if (f > prev + 1e-9 * std::abs(prev)) monotone = false;
            prev = f;
        };
        integrate({n0, 0.0}, rm, DriveSpec::none(6), opts);
        CHECK(monotone);
    }
}

TEST_CASE("stiffness is reported", "[kinetics][integrate]") {
    const auto rm = two_mode_pair(1e6);
    IntegrationOptions opts;
    opts.t_final = 1e3;
    opts.max_steps = 50;
    CHECK_THROWS_AS(integrate({Eigen::Vector2d(0.0, 1.0), 0.0}, rm, DriveSpec::none(2), opts), StiffnessError);
}
