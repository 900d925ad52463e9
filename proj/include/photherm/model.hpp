#ifndef PHOTHERM_MODEL_HPP
#define PHOTHERM_MODEL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "units.hpp"

namespace photherm {

/// In-plane wavevector in inverse micrometres.
using Wavevector = std::array<double, 2>;

inline double wavevector_norm(const Wavevector &k) {
    return std::hypot(k[0], k[1]);
}

inline double wavevector_distance(const Wavevector &a, const Wavevector &b) {
    return std::hypot(a[0] - b[0], a[1] - b[1]);
}

struct CavityMode {
    int id = 0;
    double energy = 0.0; // meV
    std::optional<Wavevector> wavevector;
    double rabi = 0.0; // collective coupling, meV
    double loss = 0.0; // meV

    void validate() const {
        const std::string where = "CavityMode " + std::to_string(id) + ": ";
        if (!(energy > 0.0) || !std::isfinite(energy))
            throw ValidationError(where + "energy must be > 0");
        if (!(rabi >= 0.0) || !std::isfinite(rabi))
            throw ValidationError(where + "rabi must be >= 0");
        if (!(loss >= 0.0) || !std::isfinite(loss))
            throw ValidationError(where + "loss must be >= 0");
    }

    bool operator==(const CavityMode &) const = default;
};

/// Parameters of a generated planar dispersion E(k) = omega0 + alpha_cav |k|^2.
struct DispersionMeta {
    double omega0 = 0.0;
    double alpha_cav = 0.0;
    std::vector<Wavevector> grid;

    bool operator==(const DispersionMeta &) const = default;
};

/// Photon modes ordered by energy (ties broken by id).
class CavityModeSet {
  public:
    explicit CavityModeSet(std::vector<CavityMode> modes,
                           std::optional<DispersionMeta> meta = std::nullopt)
        : m_modes(std::move(modes)), m_meta(std::move(meta)) {
        if (m_modes.empty())
            throw ValidationError("CavityModeSet: at least one mode required");
        std::set<int> ids;
        std::size_t with_k = 0;
        for (const auto &m : m_modes) {
            m.validate();
            if (!ids.insert(m.id).second)
                throw ValidationError("CavityModeSet: duplicate mode id " + std::to_string(m.id));
            if (m.wavevector) ++with_k;
        }
        if (with_k != 0 && with_k != m_modes.size())
            throw ValidationError("CavityModeSet: either all modes carry a wavevector or none");
        std::stable_sort(m_modes.begin(), m_modes.end(), [](const CavityMode &a, const CavityMode &b) {
            return a.energy < b.energy || (a.energy == b.energy && a.id < b.id);
        });
    }

    const std::vector<CavityMode> &modes() const { return m_modes; }
    const std::optional<DispersionMeta> &dispersion_meta() const { return m_meta; }
    std::size_t size() const { return m_modes.size(); }
    const CavityMode &operator[](std::size_t i) const { return m_modes[i]; }
    auto begin() const { return m_modes.begin(); }
    auto end() const { return m_modes.end(); }

    bool has_wavevectors() const { return m_modes.front().wavevector.has_value(); }
    double min_energy() const { return m_modes.front().energy; }
    double max_energy() const { return m_modes.back().energy; }

    int max_id() const {
        int hi = m_modes.front().id;
        for (const auto &m : m_modes) hi = std::max(hi, m.id);
        return hi;
    }

    std::vector<int> ids() const {
        std::vector<int> out;
        out.reserve(m_modes.size());
        for (const auto &m : m_modes) out.push_back(m.id);
        return out;
    }

    std::vector<double> energies() const {
        std::vector<double> out;
        out.reserve(m_modes.size());
        for (const auto &m : m_modes) out.push_back(m.energy);
        return out;
    }

    /// Position of the mode with the given id, or throws.
    std::size_t index_of(int id) const {
        for (std::size_t i = 0; i < m_modes.size(); ++i)
            if (m_modes[i].id == id) return i;
        throw ContractError("CavityModeSet: no mode with id " + std::to_string(id));
    }

    bool operator==(const CavityModeSet &) const = default;

  private:
    std::vector<CavityMode> m_modes;
    std::optional<DispersionMeta> m_meta;
};

/// Planar cavity modes on a k-grid. Ids are assigned after sorting by
/// (energy, kx, ky), so the result does not depend on grid ordering.
inline CavityModeSet build_planar_dispersion(double omega0, double alpha_cav,
                                             const std::vector<Wavevector> &k_grid,
                                             double rabi, double loss) {
    if (!(omega0 > 0.0)) throw ValidationError("build_planar_dispersion: omega0 must be > 0");
    if (k_grid.empty()) throw ValidationError("build_planar_dispersion: empty k grid");

    std::vector<std::pair<double, Wavevector>> points;
    points.reserve(k_grid.size());
    for (const auto &k : k_grid) points.emplace_back(omega0 + alpha_cav * (k[0] * k[0] + k[1] * k[1]), k);
    std::sort(points.begin(), points.end());
    for (std::size_t i = 1; i < points.size(); ++i) {
        if (points[i].second == points[i - 1].second) {
            throw ValidationError("build_planar_dispersion: duplicate grid point (" +
                                  std::to_string(points[i].second[0]) + ", " +
                                  std::to_string(points[i].second[1]) + ")");
        }
    }

    std::vector<CavityMode> modes;
    modes.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
        modes.push_back(CavityMode{static_cast<int>(i), points[i].first, points[i].second, rabi, loss});

    DispersionMeta meta{omega0, alpha_cav, {}};
    meta.grid.reserve(points.size());
    for (const auto &p : points) meta.grid.push_back(p.second);
    return CavityModeSet(std::move(modes), std::move(meta));
}

/// Square n x n grid spanning [k_min, k_max] on both axes.
inline std::vector<Wavevector> square_k_grid(double k_min, double k_max, int n) {
    if (n < 1) throw ValidationError("square_k_grid: n must be >= 1");
    std::vector<Wavevector> grid;
    grid.reserve(static_cast<std::size_t>(n) * n);
    const double step = n > 1 ? (k_max - k_min) / (n - 1) : 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) grid.push_back({k_min + i * step, k_min + j * step});
    return grid;
}

/// Low-frequency vibrational spectral product |Lambda(w)|^2 nu(w) in 1/meV.
/// Vanishes above its cutoff.
class SpectralProduct {
  public:
    enum class Kind { Constant, Tabulated, LinewidthEstimate };

    static SpectralProduct constant(double value, double cutoff) {
        if (!(value >= 0.0)) throw ValidationError("SpectralProduct: value must be >= 0");
        SpectralProduct s(Kind::Constant, cutoff);
        s.m_value = value;
        return s;
    }

    /// Linear interpolation over (omega, value) samples, clamped at the ends.
    static SpectralProduct tabulated(std::vector<double> omega, std::vector<double> value, double cutoff) {
        if (omega.size() != value.size() || omega.empty())
            throw ValidationError("SpectralProduct: table columns must be non-empty and equal length");
        for (std::size_t i = 0; i < omega.size(); ++i) {
            if (!(value[i] >= 0.0)) throw ValidationError("SpectralProduct: table values must be >= 0");
            if (i > 0 && !(omega[i] > omega[i - 1]))
                throw ValidationError("SpectralProduct: table omega must be strictly increasing");
        }
        SpectralProduct s(Kind::Tabulated, cutoff);
        s.m_omega = std::move(omega);
        s.m_table = std::move(value);
        return s;
    }

    /// A2 / (omega_MLFV * w^2): the ensemble estimate expressed as a
    /// spectral product, so that w^2 * S(w) = A2 / omega_MLFV.
    static SpectralProduct linewidth_estimate(double a2, double mlfv_cutoff) {
        if (!(a2 >= 0.0)) throw ValidationError("SpectralProduct: a2 must be >= 0");
        SpectralProduct s(Kind::LinewidthEstimate, mlfv_cutoff);
        s.m_value = a2 / mlfv_cutoff;
        return s;
    }

    /// Rebuilds a linewidth-estimate product from its stored ratio a2 / mlfv
    /// (deserialization; avoids re-rounding the quotient).
    static SpectralProduct linewidth_estimate_from_ratio(double ratio, double mlfv_cutoff) {
        if (!(ratio >= 0.0)) throw ValidationError("SpectralProduct: a2 must be >= 0");
        SpectralProduct s(Kind::LinewidthEstimate, mlfv_cutoff);
        s.m_value = ratio;
        return s;
    }

    double operator()(double omega) const {
        if (omega > m_cutoff) return 0.0;
        switch (m_kind) {
        case Kind::Constant:
            return m_value;
        case Kind::LinewidthEstimate:
            return m_value / (omega * omega);
        case Kind::Tabulated:
            break;
        }
        if (omega <= m_omega.front()) return m_table.front();
        if (omega >= m_omega.back()) return m_table.back();
        const auto hi = static_cast<std::size_t>(
            std::upper_bound(m_omega.begin(), m_omega.end(), omega) - m_omega.begin());
        const std::size_t lo = hi - 1;
        const double t = (omega - m_omega[lo]) / (m_omega[hi] - m_omega[lo]);
        return m_table[lo] + t * (m_table[hi] - m_table[lo]);
    }

    /// w^2 * S(w). Finite as w -> 0 for the linewidth estimate.
    double weighted(double omega) const {
        if (omega > m_cutoff) return 0.0;
        if (m_kind == Kind::LinewidthEstimate) return m_value;
        return omega * omega * (*this)(omega);
    }

    Kind kind() const { return m_kind; }
    double cutoff() const { return m_cutoff; }
    double value() const { return m_value; }
    const std::vector<double> &table_omega() const { return m_omega; }
    const std::vector<double> &table_value() const { return m_table; }

    bool operator==(const SpectralProduct &) const = default;

  private:
    SpectralProduct(Kind kind, double cutoff) : m_kind(kind), m_cutoff(cutoff) {
        if (!(cutoff > 0.0)) throw ValidationError("SpectralProduct: cutoff must be > 0");
    }

    Kind m_kind;
    double m_cutoff;
    double m_value = 0.0;
    std::vector<double> m_omega;
    std::vector<double> m_table;
};

/// A single emitter. Couplings and phases are indexed by cavity mode id.
struct Molecule {
    double exciton_energy = 0.0; // meV
    std::vector<double> couplings; // meV, per mode id
    std::vector<double> phases;    // rad, per mode id
    SpectralProduct spectral = SpectralProduct::constant(0.0, 1.0);

    void validate() const {
        if (!(exciton_energy > 0.0)) throw ValidationError("Molecule: exciton_energy must be > 0");
        if (!phases.empty() && phases.size() != couplings.size())
            throw ValidationError("Molecule: phases and couplings must have equal length");
        for (double g : couplings)
            if (!(g >= 0.0)) throw ValidationError("Molecule: couplings must be >= 0");
    }

    double coupling(int mode_id) const {
        if (mode_id < 0 || static_cast<std::size_t>(mode_id) >= couplings.size())
            throw ContractError("Molecule: no coupling for mode id " + std::to_string(mode_id));
        return couplings[static_cast<std::size_t>(mode_id)];
    }

    bool operator==(const Molecule &) const = default;
};

/// Either an explicit list of molecules or one representative molecule
/// standing for N identical copies.
class MolecularEnsemble {
  public:
    struct Geometry {
        double molecule_size_nm = 1.0;
        std::optional<double> concentration; // molecules per um^2
        std::optional<double> area;          // um^2
        bool operator==(const Geometry &) const = default;
    };

    static MolecularEnsemble homogeneous(Molecule molecule, std::uint64_t n_mol, Geometry geometry) {
        MolecularEnsemble e;
        e.m_molecules.push_back(std::move(molecule));
        e.m_count = n_mol;
        e.m_homogeneous = true;
        e.m_geometry = geometry;
        e.validate();
        return e;
    }

    static MolecularEnsemble heterogeneous(std::vector<Molecule> molecules, Geometry geometry) {
        MolecularEnsemble e;
        e.m_count = molecules.size();
        e.m_molecules = std::move(molecules);
        e.m_homogeneous = false;
        e.m_geometry = geometry;
        e.validate();
        return e;
    }

    /// Homogeneous ensemble whose single-molecule coupling to each mode is
    /// rabi / sqrt(N_mol).
    static MolecularEnsemble from_rabi(const CavityModeSet &modes, std::uint64_t n_mol,
                                       double exciton_energy, SpectralProduct spectral,
                                       Geometry geometry) {
        if (n_mol < 1) throw ValidationError("MolecularEnsemble: N_mol must be >= 1");
        Molecule m;
        m.exciton_energy = exciton_energy;
        m.couplings.assign(static_cast<std::size_t>(modes.max_id()) + 1, 0.0);
        m.phases.assign(m.couplings.size(), 0.0);
        const double scale = 1.0 / std::sqrt(static_cast<double>(n_mol));
        for (const auto &mode : modes) m.couplings[static_cast<std::size_t>(mode.id)] = mode.rabi * scale;
        m.spectral = std::move(spectral);
        return homogeneous(std::move(m), n_mol, geometry);
    }

    bool is_homogeneous() const { return m_homogeneous; }
    std::uint64_t n_mol() const { return m_count; }
    const std::vector<Molecule> &molecules() const { return m_molecules; }

    /// Number of physical molecules represented by molecules()[i].
    std::uint64_t multiplicity() const { return m_homogeneous ? m_count : 1; }

    const Geometry &geometry() const { return m_geometry; }
    double molecule_size_nm() const { return m_geometry.molecule_size_nm; }

    /// Largest wavevector transfer 2 pi / l in 1/um.
    double wavevector_bound() const { return 2.0 * kPi / (m_geometry.molecule_size_nm * 1e-3); }

    double mean_exciton_energy() const {
        double sum = 0.0;
        for (const auto &m : m_molecules) sum += m.exciton_energy;
        return sum / static_cast<double>(m_molecules.size());
    }

    bool operator==(const MolecularEnsemble &) const = default;

  private:
    MolecularEnsemble() = default;

    void validate() const {
        if (m_count < 1 || m_molecules.empty()) throw ValidationError("MolecularEnsemble: N_mol must be >= 1");
        if (!(m_geometry.molecule_size_nm > 0.0))
            throw ValidationError("MolecularEnsemble: molecule_size must be > 0");
        if (m_geometry.concentration && !(*m_geometry.concentration > 0.0))
            throw ValidationError("MolecularEnsemble: concentration must be > 0");
        if (m_geometry.area && !(*m_geometry.area > 0.0))
            throw ValidationError("MolecularEnsemble: area must be > 0");
        if (m_geometry.concentration && m_geometry.area) {
            const double expected = std::round(*m_geometry.concentration * *m_geometry.area);
            if (expected != static_cast<double>(m_count)) {
                throw ValidationError("MolecularEnsemble: N_mol = " + std::to_string(m_count) +
                                      " inconsistent with concentration * area = " +
                                      std::to_string(expected));
            }
        }
        for (const auto &m : m_molecules) m.validate();
    }

    std::vector<Molecule> m_molecules;
    std::uint64_t m_count = 0;
    bool m_homogeneous = false;
    Geometry m_geometry;
};

struct VibrationalBath {
    double temperature = 300.0; // K
    double mlfv_cutoff = 20.0;  // meV
    double a2 = 0.0;            // meV^2
    double gamma0 = 0.0;        // meV
    std::optional<double> slope_c; // meV^2 / K

    void validate() const {
        if (!(temperature > 0.0)) throw ValidationError("VibrationalBath: temperature must be > 0");
        if (!(mlfv_cutoff > 0.0)) throw ValidationError("VibrationalBath: mlfv_cutoff must be > 0");
        if (!(a2 >= 0.0)) throw ValidationError("VibrationalBath: a2 must be >= 0");
        if (!(gamma0 >= 0.0)) throw ValidationError("VibrationalBath: gamma0 must be >= 0");
        if (slope_c && !(*slope_c >= 0.0)) throw ValidationError("VibrationalBath: slope_c must be >= 0");
    }

    /// Crossover temperature hbar omega_MLFV / k_B.
    double crossover_temperature() const { return mlfv_cutoff / kBoltzmann; }

    bool operator==(const VibrationalBath &) const = default;
};

struct LinewidthBranches {
    double low_t = 0.0;              // sqrt(G0^2 + A2)
    std::optional<double> high_t;    // sqrt(G0^2 + C T), when C is known
    bool high_branch_selected = false;
    double crossover_temperature = 0.0;
};

inline LinewidthBranches linewidth_branches(const VibrationalBath &bath, double temperature) {
    if (!(temperature > 0.0)) throw DomainError("exciton_linewidth: temperature must be > 0");
    LinewidthBranches b;
    b.crossover_temperature = bath.crossover_temperature();
    b.low_t = std::sqrt(bath.gamma0 * bath.gamma0 + bath.a2);
    if (bath.slope_c) b.high_t = std::sqrt(bath.gamma0 * bath.gamma0 + *bath.slope_c * temperature);
    b.high_branch_selected = temperature >= b.crossover_temperature;
    return b;
}

/// 0-0 emission linewidth. Hard switch between the two asymptotic branches
/// at T* = omega_MLFV / k_B.
inline double exciton_linewidth(const VibrationalBath &bath, double temperature) {
    const auto b = linewidth_branches(bath, temperature);
    if (!b.high_branch_selected) return b.low_t;
    if (!b.high_t)
        throw ConfigurationError("exciton_linewidth: T = " + std::to_string(temperature) +
                                 " K is above the crossover but slope_c is not set");
    return *b.high_t;
}

struct WeakCouplingCheck {
    int mode_id = 0;
    bool rabi_below_broadening = false;    // Omega_R < max(Gamma_cav, Gamma_0)
    bool broadening_below_detuning = false; // max(Gamma_cav, Gamma_0) < w_exc - w_cav
    double rabi_margin = 0.0;
    double detuning_margin = 0.0;

    bool passed() const { return rabi_below_broadening && broadening_below_detuning; }
};

struct WeakCouplingReport {
    std::vector<WeakCouplingCheck> modes;

    bool passed() const {
        return std::all_of(modes.begin(), modes.end(), [](const auto &m) { return m.passed(); });
    }
};

inline WeakCouplingReport validate_weak_coupling(const CavityModeSet &modes, const MolecularEnsemble &ensemble,
                                                 const VibrationalBath &bath) {
    WeakCouplingReport report;
    const double exciton = ensemble.mean_exciton_energy();
    for (const auto &mode : modes) {
        WeakCouplingCheck c;
        c.mode_id = mode.id;
        const double broadening = std::max(mode.loss, bath.gamma0);
        const double detuning = exciton - mode.energy;
        c.rabi_margin = broadening - mode.rabi;
        c.detuning_margin = detuning - broadening;
        c.rabi_below_broadening = mode.rabi < broadening || mode.rabi == 0.0;
        c.broadening_below_detuning = broadening < detuning;
        report.modes.push_back(c);
    }
    return report;
}

} // namespace photherm

#endif // PHOTHERM_MODEL_HPP
