#ifndef PHOTHERM_EQUILIBRIUM_HPP
#define PHOTHERM_EQUILIBRIUM_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "model.hpp"
#include "rates.hpp"
#include "units.hpp"

namespace photherm {

struct EquilibriumResult {
    double chemical_potential = 0.0; // meV
    double gap_below_ground = 0.0;   // min energy - mu, meV (kept separately for precision)
    Eigen::VectorXd occupations;
    double ground_fraction = 0.0;
    bool converged = false;
    int iterations = 0;
};

/// Bose-Einstein occupations given the gap x = E_min - mu > 0.
inline Eigen::VectorXd bose_einstein_from_gap(const std::vector<double> &energies, double gap, double temperature) {
    const double kt = thermal_energy(temperature);
    const double e_min = *std::min_element(energies.begin(), energies.end());
    Eigen::VectorXd n(static_cast<Eigen::Index>(energies.size()));
    for (std::size_t i = 0; i < energies.size(); ++i)
        n(static_cast<Eigen::Index>(i)) = 1.0 / std::expm1(((energies[i] - e_min) + gap) / kt);
    return n;
}

inline Eigen::VectorXd bose_einstein(const std::vector<double> &energies, double mu, double temperature) {
    const double e_min = *std::min_element(energies.begin(), energies.end());
    if (!(mu < e_min)) throw DomainError("bose_einstein: chemical potential must lie below the lowest mode");
    return bose_einstein_from_gap(energies, e_min - mu, temperature);
}

/// Chemical potential such that the Bose-Einstein occupations sum to n_total.
/// Bisection on log(E_min - mu); the total is strictly monotone in mu.
inline EquilibriumResult solve_chemical_potential(const std::vector<double> &energies, double temperature,
                                                  double n_total) {
    if (energies.empty()) throw ContractError("solve_chemical_potential: no modes");
    if (!(n_total > 0.0)) throw DomainError("solve_chemical_potential: N_total must be > 0");
    if (!(temperature > 0.0)) throw DomainError("solve_chemical_potential: temperature must be > 0");

    const double kt = thermal_energy(temperature);
    const double e_min = *std::min_element(energies.begin(), energies.end());
    auto total = [&](double gap) {
        double s = 0.0;
        for (double e : energies) s += 1.0 / std::expm1(((e - e_min) + gap) / kt);
        return s;
    };

    double lo = kt, hi = kt;
    int iterations = 0;
    while (total(hi) > n_total && iterations < 4000) {
        hi *= 2.0;
        ++iterations;
    }
    while (total(lo) < n_total && lo > 1e-300) {
        lo *= 0.5;
        ++iterations;
    }

    for (int it = 0; it < 400 && hi / lo - 1.0 > 4e-16; ++it, ++iterations) {
        const double mid = std::sqrt(lo * hi);
        if (mid <= lo || mid >= hi) break;
        if (total(mid) > n_total) lo = mid;
        else hi = mid;
    }
    const double gap = std::abs(total(lo) - n_total) <= std::abs(total(hi) - n_total) ? lo : hi;

    EquilibriumResult r;
    r.gap_below_ground = gap;
    r.chemical_potential = e_min - gap;
    r.occupations = bose_einstein_from_gap(energies, gap, temperature);
    const auto ground = static_cast<Eigen::Index>(std::min_element(energies.begin(), energies.end()) - energies.begin());
    const double sum = r.occupations.sum();
    r.ground_fraction = r.occupations(ground) / sum;
    r.converged = std::abs(sum - n_total) <= 1e-10 * n_total;
    r.iterations = iterations;
    return r;
}

inline EquilibriumResult solve_chemical_potential(const CavityModeSet &modes, double temperature, double n_total) {
    return solve_chemical_potential(modes.energies(), temperature, n_total);
}

/// Total in-rate to the reference mode at unit source occupation, in 1/ps.
inline double effective_thermalization_rate(const RateMatrix &rates, std::size_t reference = 0) {
    if (reference >= rates.size()) throw ContractError("effective_thermalization_rate: reference out of range");
    return rate_to_inverse_ps(rates.gamma().row(static_cast<Eigen::Index>(reference)).sum());
}

/// Free-energy-like Lyapunov functional of the kinetics,
/// sum (E - mu) n - kT [(1 + n) ln(1 + n) - n ln n]. Negative entries are
/// treated as zero.
inline double free_energy(const Eigen::VectorXd &n, const std::vector<double> &energies, double temperature,
                          double mu) {
    const double kt = thermal_energy(temperature);
    double f = 0.0;
    for (Eigen::Index i = 0; i < n.size(); ++i) {
        const double x = std::max(n(i), 0.0);
        const double entropy = (1.0 + x) * std::log1p(x) - (x > 0.0 ? x * std::log(x) : 0.0);
        f += (energies[static_cast<std::size_t>(i)] - mu) * x - kt * entropy;
    }
    return f;
}

} // namespace photherm

#endif // PHOTHERM_EQUILIBRIUM_HPP
