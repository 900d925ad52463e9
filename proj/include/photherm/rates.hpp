#ifndef PHOTHERM_RATES_HPP
#define PHOTHERM_RATES_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "model.hpp"
#include "units.hpp"

namespace photherm {

enum class RateSource { Microscopic, Estimate };

inline const char *to_string(RateSource s) {
    return s == RateSource::Microscopic ? "microscopic" : "estimate";
}

/// Handling of mode pairs closer than epsilon in energy, where the
/// (1 + n_vib) factor diverges.
enum class DegenerateMode {
    Zero,       ///< drop the pair
    Floor,      ///< both directions evaluated at the clamped gap epsilon
    FloorKeepKms ///< down-rate at the clamped gap, up-rate from the true gap
};

inline const char *to_string(DegenerateMode m) {
    switch (m) {
    case DegenerateMode::Zero: return "zero";
    case DegenerateMode::Floor: return "floor";
    case DegenerateMode::FloorKeepKms: return "floor_kms";
    }
    return "?";
}

struct RegularizationPolicy {
    DegenerateMode mode = DegenerateMode::FloorKeepKms;
    std::optional<double> epsilon; ///< meV; defaults to mlfv_cutoff / 1000

    double resolved_epsilon(const VibrationalBath &bath) const {
        return epsilon ? *epsilon : bath.mlfv_cutoff / 1000.0;
    }
};

enum class CutoffReason { EnergyCutoff, WavevectorCutoff, DegenerateZero, DegenerateFloor };

inline const char *to_string(CutoffReason r) {
    switch (r) {
    case CutoffReason::EnergyCutoff: return "energy_cutoff";
    case CutoffReason::WavevectorCutoff: return "wavevector_cutoff";
    case CutoffReason::DegenerateZero: return "degenerate_zero";
    case CutoffReason::DegenerateFloor: return "degenerate_floor";
    }
    return "?";
}

/// One zeroed or regularised pair. lower/upper are mode ids ordered by energy.
struct CutoffEntry {
    int lower_id = 0;
    int upper_id = 0;
    CutoffReason reason = CutoffReason::EnergyCutoff;
    double delta_energy = 0.0;

    bool operator==(const CutoffEntry &) const = default;
};

/// Dense matrix of thermalisation rates. gamma(a, b) is the coefficient of
/// the b -> a transfer, i.e. it multiplies (n_a + 1) n_b in the kinetics.
class RateMatrix {
  public:
    RateMatrix(Eigen::MatrixXd gamma, std::vector<int> mode_ids, std::vector<double> energies,
               double temperature, RateSource source = RateSource::Estimate,
               std::vector<CutoffEntry> cutoffs = {}, RegularizationPolicy reg = {},
               double epsilon = 0.0)
        : m_gamma(std::move(gamma)), m_ids(std::move(mode_ids)), m_energies(std::move(energies)),
          m_temperature(temperature), m_source(source), m_cutoffs(std::move(cutoffs)), m_reg(reg),
          m_epsilon(epsilon) {
        const auto n = static_cast<Eigen::Index>(m_ids.size());
        if (m_gamma.rows() != n || m_gamma.cols() != n || static_cast<Eigen::Index>(m_energies.size()) != n)
            throw ContractError("RateMatrix: gamma, mode_ids and energies must agree in size");
        if (!(temperature > 0.0)) throw ValidationError("RateMatrix: temperature must be > 0");
        for (Eigen::Index i = 0; i < n; ++i) {
            if (m_gamma(i, i) != 0.0) throw ValidationError("RateMatrix: diagonal must be zero");
            for (Eigen::Index j = 0; j < n; ++j)
                if (!(m_gamma(i, j) >= 0.0)) throw ValidationError("RateMatrix: rates must be >= 0");
        }
    }

    /// Zero matrix on the given modes.
    static RateMatrix zeros(const CavityModeSet &modes, double temperature) {
        const auto n = static_cast<Eigen::Index>(modes.size());
        return RateMatrix(Eigen::MatrixXd::Zero(n, n), modes.ids(), modes.energies(), temperature);
    }

    std::size_t size() const { return m_ids.size(); }
    double operator()(std::size_t a, std::size_t b) const {
        return m_gamma(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }
    const Eigen::MatrixXd &gamma() const { return m_gamma; }
    const std::vector<int> &mode_ids() const { return m_ids; }
    const std::vector<double> &energies() const { return m_energies; }
    double temperature() const { return m_temperature; }
    RateSource source() const { return m_source; }
    const std::vector<CutoffEntry> &cutoff_record() const { return m_cutoffs; }
    const RegularizationPolicy &regularization() const { return m_reg; }
    double degenerate_epsilon() const { return m_epsilon; }

    RateMatrix scaled(double factor) const {
        RateMatrix out = *this;
        out.m_gamma *= factor;
        return out;
    }

    std::size_t nonzero_pairs() const {
        std::size_t count = 0;
        for (Eigen::Index i = 0; i < m_gamma.rows(); ++i)
            for (Eigen::Index j = i + 1; j < m_gamma.cols(); ++j)
                if (m_gamma(i, j) > 0.0 || m_gamma(j, i) > 0.0) ++count;
        return count;
    }

  private:
    Eigen::MatrixXd m_gamma;
    std::vector<int> m_ids;
    std::vector<double> m_energies;
    double m_temperature;
    RateSource m_source;
    std::vector<CutoffEntry> m_cutoffs;
    RegularizationPolicy m_reg;
    double m_epsilon;
};

/// Up-rate from a down-rate by detailed balance across a gap delta_energy.
inline double kms_complete(double down_rate, double delta_energy, double temperature) {
    if (!(down_rate >= 0.0)) throw ContractError("kms_complete: down_rate must be >= 0");
    if (!(delta_energy >= 0.0)) throw ContractError("kms_complete: delta_energy must be >= 0");
    if (!(temperature > 0.0)) throw DomainError("kms_complete: temperature must be > 0");
    return down_rate * std::exp(-delta_energy / thermal_energy(temperature));
}

namespace detail {

inline void require_ordered(const CavityMode &alpha, const CavityMode &beta, const char *who) {
    if (!(beta.energy > alpha.energy)) {
        throw ContractError(std::string(who) + ": requires energy(beta) > energy(alpha); got modes " +
                            std::to_string(alpha.id) + " (" + std::to_string(alpha.energy) + " meV) and " +
                            std::to_string(beta.id) + " (" + std::to_string(beta.energy) + " meV)");
    }
}

/// Downward microscopic rate with the vibrational factors evaluated at gap.
inline double microscopic_down(const CavityMode &alpha, const CavityMode &beta, const MolecularEnsemble &ensemble,
                               const VibrationalBath &bath, double gap) {
    const double thermal = 1.0 + planck_occupation(gap, bath.temperature);
    const double mult = static_cast<double>(ensemble.multiplicity());
    double sum = 0.0;
    const auto &mols = ensemble.molecules();
    for (std::size_t m = 0; m < mols.size(); ++m) {
        const Molecule &mol = mols[m];
        const double d_alpha = mol.exciton_energy - alpha.energy;
        const double d_beta = mol.exciton_energy - beta.energy;
        if (d_alpha == 0.0 || d_beta == 0.0) {
            throw SingularityError("microscopic_pair_rate: molecule " + std::to_string(m) +
                                   " is resonant with mode " + std::to_string(d_alpha == 0.0 ? alpha.id : beta.id));
        }
        const double ga = mol.coupling(alpha.id);
        const double gb = mol.coupling(beta.id);
        if (ga == 0.0 || gb == 0.0) continue;
        const double ga2 = ga * ga;
        const double gb2 = gb * gb;
        sum += mult * (ga2 * gb2) / (d_beta * d_beta * (d_alpha * d_alpha)) * mol.spectral.weighted(gap);
    }
    return 2.0 * kPi * sum * thermal;
}

inline double estimate_prefactor(const CavityMode &alpha, const CavityMode &beta, double mean_exciton,
                                 std::uint64_t n_mol, const VibrationalBath &bath) {
    if (!(mean_exciton > beta.energy)) {
        throw DomainError("estimated_pair_rate: mean exciton energy " + std::to_string(mean_exciton) +
                          " meV must exceed mode energy " + std::to_string(beta.energy) + " meV (red detuning)");
    }
    if (n_mol < 1) throw ContractError("estimated_pair_rate: N_mol must be >= 1");
    const double d_alpha = mean_exciton - alpha.energy;
    const double d_beta = mean_exciton - beta.energy;
    const double ra2 = alpha.rabi * alpha.rabi;
    const double rb2 = beta.rabi * beta.rabi;
    return 2.0 * kPi * bath.a2 * ra2 * rb2 /
           (static_cast<double>(n_mol) * bath.mlfv_cutoff * (d_beta * d_beta) * (d_alpha * d_alpha));
}

} // namespace detail

/// Rate of the beta -> alpha (downward) transfer from the per-molecule sum.
inline double microscopic_pair_rate(const CavityMode &alpha, const CavityMode &beta,
                                    const MolecularEnsemble &ensemble, const VibrationalBath &bath) {
    detail::require_ordered(alpha, beta, "microscopic_pair_rate");
    return detail::microscopic_down(alpha, beta, ensemble, bath, beta.energy - alpha.energy);
}

struct RatePair {
    double down = 0.0;
    double up = 0.0;
};

/// Ensemble estimate of the (down, up) rates from macroscopic parameters.
inline RatePair estimated_pair_rate(const CavityMode &alpha, const CavityMode &beta, double mean_exciton,
                                    std::uint64_t n_mol, const VibrationalBath &bath) {
    detail::require_ordered(alpha, beta, "estimated_pair_rate");
    const double pref = detail::estimate_prefactor(alpha, beta, mean_exciton, n_mol, bath);
    const double n = planck_occupation(beta.energy - alpha.energy, bath.temperature);
    return {pref * (1.0 + n), pref * n};
}

/// Rates for a pair with gap below epsilon. down_at(gap) evaluates the
/// policy's downward rate with the vibrational factors taken at gap.
inline RatePair regularize_degenerate(double delta_energy, const RegularizationPolicy &reg, double epsilon,
                                      double temperature, const std::function<double(double)> &down_at) {
    if (!(delta_energy >= 0.0)) throw ContractError("regularize_degenerate: delta_energy must be >= 0");
    switch (reg.mode) {
    case DegenerateMode::Zero:
        return {0.0, 0.0};
    case DegenerateMode::Floor: {
        const double down = down_at(epsilon);
        return {down, kms_complete(down, epsilon, temperature)};
    }
    case DegenerateMode::FloorKeepKms: {
        const double down = down_at(epsilon);
        return {down, kms_complete(down, delta_energy, temperature)};
    }
    }
    return {0.0, 0.0};
}

struct AssemblyOptions {
    RateSource source = RateSource::Estimate;
    RegularizationPolicy regularization;
    /// Wavevector transfer bound in 1/um; defaults to 2 pi / molecule_size.
    std::optional<double> k_bound;
};

inline RateMatrix assemble_rate_matrix(const CavityModeSet &modes, const MolecularEnsemble &ensemble,
                                       const VibrationalBath &bath, const AssemblyOptions &opts = {}) {
    bath.validate();
    const std::size_t n = modes.size();
    const double epsilon = opts.regularization.resolved_epsilon(bath);
    if (!(epsilon > 0.0)) throw ValidationError("assemble_rate_matrix: degenerate epsilon must be > 0");
    const double k_bound = opts.k_bound ? *opts.k_bound : ensemble.wavevector_bound();
    const bool use_k = modes.has_wavevectors();
    const double mean_exciton = ensemble.mean_exciton_energy();

    Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<CutoffEntry> record;

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const CavityMode &lo = modes[i];
            const CavityMode &hi = modes[j];
            const double delta = hi.energy - lo.energy;

            if (delta > bath.mlfv_cutoff) {
                record.push_back({lo.id, hi.id, CutoffReason::EnergyCutoff, delta});
                continue;
            }
            if (use_k && wavevector_distance(*lo.wavevector, *hi.wavevector) > k_bound) {
                record.push_back({lo.id, hi.id, CutoffReason::WavevectorCutoff, delta});
                continue;
            }

            auto down_at = [&](double gap) {
                if (opts.source == RateSource::Microscopic) return detail::microscopic_down(lo, hi, ensemble, bath, gap);
                return detail::estimate_prefactor(lo, hi, mean_exciton, ensemble.n_mol(), bath) *
                       (1.0 + planck_occupation(gap, bath.temperature));
            };

            RatePair rates;
            try {
                if (delta < epsilon) {
                    rates = regularize_degenerate(delta, opts.regularization, epsilon, bath.temperature, down_at);
                    record.push_back({lo.id, hi.id,
                                      opts.regularization.mode == DegenerateMode::Zero ? CutoffReason::DegenerateZero
                                                                                       : CutoffReason::DegenerateFloor,
                                      delta});
                } else {
                    rates.down = down_at(delta);
                    rates.up = kms_complete(rates.down, delta, bath.temperature);
                }
            } catch (const SingularityError &e) {
                throw SingularityError("pair (" + std::to_string(lo.id) + ", " + std::to_string(hi.id) + "): " + e.what());
            } catch (const DomainError &e) {
                throw DomainError("pair (" + std::to_string(lo.id) + ", " + std::to_string(hi.id) + "): " + e.what());
            } catch (const ContractError &e) {
                throw ContractError("pair (" + std::to_string(lo.id) + ", " + std::to_string(hi.id) + "): " + e.what());
            }
            const auto a = static_cast<Eigen::Index>(i);
            const auto b = static_cast<Eigen::Index>(j);
            gamma(a, b) = rates.down;
            gamma(b, a) = rates.up;
        }
    }
    return RateMatrix(std::move(gamma), modes.ids(), modes.energies(), bath.temperature, opts.source,
                      std::move(record), opts.regularization, epsilon);
}

/// Sub-matrix on the given mode indices (energy order is preserved if the
/// indices are increasing). Cutoff entries between kept modes are retained.
inline RateMatrix restrict_rates(const RateMatrix &rm, const std::vector<std::size_t> &indices) {
    const auto n = static_cast<Eigen::Index>(indices.size());
    Eigen::MatrixXd g(n, n);
    std::vector<int> ids;
    std::vector<double> energies;
    for (Eigen::Index a = 0; a < n; ++a) {
        const auto ia = indices[static_cast<std::size_t>(a)];
        if (ia >= rm.size()) throw ContractError("restrict_rates: index out of range");
        ids.push_back(rm.mode_ids()[ia]);
        energies.push_back(rm.energies()[ia]);
        for (Eigen::Index b = 0; b < n; ++b) g(a, b) = rm(ia, indices[static_cast<std::size_t>(b)]);
    }
    std::vector<CutoffEntry> kept;
    auto has = [&](int id) { return std::find(ids.begin(), ids.end(), id) != ids.end(); };
    for (const auto &c : rm.cutoff_record())
        if (has(c.lower_id) && has(c.upper_id)) kept.push_back(c);
    return RateMatrix(std::move(g), std::move(ids), std::move(energies), rm.temperature(), rm.source(),
                      std::move(kept), rm.regularization(), rm.degenerate_epsilon());
}

/// Violations of the RateMatrix structural invariants (empty when valid).
/// Pairs regularised with DegenerateMode::Floor are checked for detailed
/// balance at the clamped gap instead of the true one.
inline std::vector<std::string> check_rate_invariants(const RateMatrix &rm, double rel_tol = 1e-12) {
    std::vector<std::string> issues;
    const auto &g = rm.gamma();
    const auto &e = rm.energies();
    const double kt = thermal_energy(rm.temperature());
    const bool literal_floor = rm.regularization().mode == DegenerateMode::Floor;
    const auto n = g.rows();
    auto label = [&](Eigen::Index a, Eigen::Index b) {
        return "(" + std::to_string(rm.mode_ids()[static_cast<std::size_t>(a)]) + ", " +
               std::to_string(rm.mode_ids()[static_cast<std::size_t>(b)]) + ")";
    };
    for (Eigen::Index a = 0; a < n; ++a) {
        if (g(a, a) != 0.0) issues.push_back("nonzero diagonal at " + label(a, a));
        for (Eigen::Index b = a + 1; b < n; ++b) {
            const auto ua = static_cast<std::size_t>(a);
            const auto ub = static_cast<std::size_t>(b);
            Eigen::Index lo = a, hi = b;
            if (e[ub] < e[ua]) std::swap(lo, hi);
            const double down = g(lo, hi);
            const double up = g(hi, lo);
            if (down < 0.0 || up < 0.0) issues.push_back("negative rate at " + label(lo, hi));
            if ((down == 0.0) != (up == 0.0)) issues.push_back("asymmetric zeroing at " + label(lo, hi));
            if (down > 0.0) {
                double gap = std::abs(e[ub] - e[ua]);
                if (literal_floor && gap < rm.degenerate_epsilon()) gap = rm.degenerate_epsilon();
                const double expected = down * std::exp(-gap / kt);
                if (std::abs(up - expected) > rel_tol * expected)
                    issues.push_back("detailed balance violated at " + label(lo, hi));
            }
        }
    }
    return issues;
}

} // namespace photherm

#endif // PHOTHERM_RATES_HPP
