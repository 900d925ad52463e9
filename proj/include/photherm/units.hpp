#ifndef PHOTHERM_UNITS_HPP
#define PHOTHERM_UNITS_HPP

#include <cmath>
#include <string>

#include "errors.hpp"

namespace photherm {

// Energies, frequencies and rates are all carried as energies in meV
// (hbar = 1). Temperatures are in kelvin, times in picoseconds.

/// Boltzmann constant in meV/K.
inline constexpr double kBoltzmann = 0.08617333;

/// Reduced Planck constant in meV*ps.
inline constexpr double kHbar = 0.6582119569;

/// 1 meV of rate corresponds to this many inverse picoseconds (~1.519267).
inline constexpr double kMeVToInversePs = 1.0 / kHbar;

inline constexpr double kPi = 3.14159265358979323846;

inline double thermal_energy(double temperature) {
    return kBoltzmann * temperature;
}

/// Bose occupation 1 / (exp(E / kT) - 1) of a vibrational mode.
inline double planck_occupation(double energy, double temperature) {
    if (!(energy > 0.0)) {
        throw DomainError("planck_occupation: energy must be > 0 meV, got " +
                          std::to_string(energy));
    }
    if (!(temperature > 0.0)) {
        throw DomainError("planck_occupation: temperature must be > 0 K, got " +
                          std::to_string(temperature));
    }
    return 1.0 / std::expm1(energy / thermal_energy(temperature));
}

inline double rate_to_inverse_ps(double rate_mev) {
    return rate_mev * kMeVToInversePs;
}

inline double rate_to_mev(double rate_inverse_ps) {
    return rate_inverse_ps / kMeVToInversePs;
}

} // namespace photherm

#endif // PHOTHERM_UNITS_HPP
