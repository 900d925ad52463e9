#ifndef PHOTHERM_LINDBLAD_HPP
#define PHOTHERM_LINDBLAD_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include "errors.hpp"
#include "rates.hpp"
#include "units.hpp"

namespace photherm::oracle {

using Complex = std::complex<double>;
using SparseOp = Eigen::SparseMatrix<Complex>;

/// Truncated Fock space of up to three photon modes, each holding at most
/// `cutoff` photons. Basis index = sum_a n_a (cutoff + 1)^a, so mode 0 is
/// the fastest-varying digit.
class FockSpace {
  public:
    static constexpr std::size_t kMaxModes = 3;
    static constexpr std::size_t kMaxDimension = 4096;

    FockSpace(std::size_t n_modes, int cutoff) : m_modes(n_modes), m_cutoff(cutoff) {
        if (n_modes < 1 || n_modes > kMaxModes) throw ValidationError("FockSpace: 1 to 3 modes supported");
        if (cutoff < 1) throw ValidationError("FockSpace: cutoff must be >= 1");
        m_dim = 1;
        for (std::size_t a = 0; a < n_modes; ++a) {
            m_dim *= static_cast<std::size_t>(cutoff) + 1;
            if (m_dim > kMaxDimension) throw ValidationError("FockSpace: dimension exceeds 4096");
        }
    }

    std::size_t n_modes() const { return m_modes; }
    int cutoff() const { return m_cutoff; }
    std::size_t dimension() const { return m_dim; }

    int occupation(std::size_t index, std::size_t mode) const {
        for (std::size_t a = 0; a < mode; ++a) index /= static_cast<std::size_t>(m_cutoff) + 1;
        return static_cast<int>(index % (static_cast<std::size_t>(m_cutoff) + 1));
    }

    std::vector<int> occupations(std::size_t index) const {
        std::vector<int> out(m_modes);
        for (std::size_t a = 0; a < m_modes; ++a) out[a] = occupation(index, a);
        return out;
    }

    std::size_t index(const std::vector<int> &occ) const {
        if (occ.size() != m_modes) throw ContractError("FockSpace::index: wrong number of occupations");
        std::size_t idx = 0, stride = 1;
        for (std::size_t a = 0; a < m_modes; ++a) {
            if (occ[a] < 0 || occ[a] > m_cutoff) throw ContractError("FockSpace::index: occupation out of range");
            idx += static_cast<std::size_t>(occ[a]) * stride;
            stride *= static_cast<std::size_t>(m_cutoff) + 1;
        }
        return idx;
    }

    bool on_boundary(std::size_t index) const {
        for (std::size_t a = 0; a < m_modes; ++a)
            if (occupation(index, a) == m_cutoff) return true;
        return false;
    }

    /// Truncated annihilation operator of one mode.
    SparseOp annihilation(std::size_t mode) const {
        std::vector<Eigen::Triplet<Complex>> trip;
        for (std::size_t i = 0; i < m_dim; ++i) {
            const int n = occupation(i, mode);
            if (n == 0) continue;
            auto occ = occupations(i);
            --occ[mode];
            trip.emplace_back(static_cast<int>(index(occ)), static_cast<int>(i), std::sqrt(static_cast<double>(n)));
        }
        SparseOp op(static_cast<Eigen::Index>(m_dim), static_cast<Eigen::Index>(m_dim));
        op.setFromTriplets(trip.begin(), trip.end());
        return op;
    }

    SparseOp number(std::size_t mode) const {
        std::vector<Eigen::Triplet<Complex>> trip;
        for (std::size_t i = 0; i < m_dim; ++i) trip.emplace_back(static_cast<int>(i), static_cast<int>(i), occupation(i, mode));
        SparseOp op(static_cast<Eigen::Index>(m_dim), static_cast<Eigen::Index>(m_dim));
        op.setFromTriplets(trip.begin(), trip.end());
        return op;
    }

  private:
    std::size_t m_modes;
    int m_cutoff;
    std::size_t m_dim = 1;
};

/// Photon density matrix on a FockSpace.
class DensityMatrix {
  public:
    DensityMatrix(const FockSpace &space, Eigen::MatrixXcd rho) : m_space(space), m_rho(std::move(rho)) {
        const auto d = static_cast<Eigen::Index>(space.dimension());
        if (m_rho.rows() != d || m_rho.cols() != d) throw ContractError("DensityMatrix: size does not match space");
    }

    const FockSpace &space() const { return m_space; }
    const Eigen::MatrixXcd &matrix() const { return m_rho; }

    Complex trace() const { return m_rho.trace(); }

    double hermiticity_error() const { return (m_rho - m_rho.adjoint()).cwiseAbs().maxCoeff(); }

    double min_eigenvalue() const {
        const Eigen::MatrixXcd h = 0.5 * (m_rho + m_rho.adjoint());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }

    /// Throws ValidationError unless Hermitian, unit-trace and PSD within tolerance.
    void validate(double hermitian_tol = 1e-12, double trace_tol = 1e-12, double psd_tol = 1e-10) const {
        if (hermiticity_error() > hermitian_tol) throw ValidationError("DensityMatrix: not Hermitian");
        if (std::abs(trace() - Complex(1.0, 0.0)) > trace_tol) throw ValidationError("DensityMatrix: trace != 1");
        if (min_eigenvalue() < -psd_tol) throw ValidationError("DensityMatrix: not positive semidefinite");
    }

    double expect_number(std::size_t mode) const {
        double s = 0.0;
        for (std::size_t i = 0; i < m_space.dimension(); ++i)
            s += m_rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real() * m_space.occupation(i, mode);
        return s;
    }

    double expect_total_number() const {
        double s = 0.0;
        for (std::size_t a = 0; a < m_space.n_modes(); ++a) s += expect_number(a);
        return s;
    }

    /// <(n_a + 1) n_b> with the untruncated (n + 1) factor.
    double expect_gain_moment(std::size_t a, std::size_t b) const {
        double s = 0.0;
        for (std::size_t i = 0; i < m_space.dimension(); ++i) {
            const double p = m_rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real();
            s += p * (m_space.occupation(i, a) + 1.0) * m_space.occupation(i, b);
        }
        return s;
    }

    double boundary_population() const {
        double s = 0.0;
        for (std::size_t i = 0; i < m_space.dimension(); ++i)
            if (m_space.on_boundary(i)) s += m_rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real();
        return s;
    }

  private:
    FockSpace m_space;
    Eigen::MatrixXcd m_rho;
};

inline DensityMatrix fock_state(const FockSpace &space, const std::vector<int> &occ) {
    const auto d = static_cast<Eigen::Index>(space.dimension());
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(d, d);
    const auto i = static_cast<Eigen::Index>(space.index(occ));
    rho(i, i) = 1.0;
    return DensityMatrix(space, std::move(rho));
}

inline DensityMatrix pure_state(const FockSpace &space, const Eigen::VectorXcd &psi) {
    if (static_cast<std::size_t>(psi.size()) != space.dimension()) throw ContractError("pure_state: wrong size");
    const Eigen::VectorXcd v = psi / psi.norm();
    return DensityMatrix(space, v * v.adjoint());
}

/// Product of per-mode truncated geometric (thermal) distributions with
/// the given untruncated mean occupations, renormalised on the space.
inline DensityMatrix thermal_product_state(const FockSpace &space, const std::vector<double> &mean_occupations) {
    if (mean_occupations.size() != space.n_modes()) throw ContractError("thermal_product_state: wrong mode count");
    const auto d = static_cast<Eigen::Index>(space.dimension());
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(d, d);
    double norm = 0.0;
    for (std::size_t i = 0; i < space.dimension(); ++i) {
        double p = 1.0;
        for (std::size_t a = 0; a < space.n_modes(); ++a) {
            const double nbar = mean_occupations[a];
            const double r = nbar / (1.0 + nbar);
            p *= std::pow(r, space.occupation(i, a)) / (1.0 + nbar);
        }
        rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = p;
        norm += p;
    }
    rho /= norm;
    return DensityMatrix(space, std::move(rho));
}

/// Truncated Gibbs-like state diag ~ exp(-sum (E_a - mu) n_a / kT).
inline DensityMatrix gibbs_state(const FockSpace &space, const std::vector<double> &energies, double mu,
                                 double temperature) {
    if (energies.size() != space.n_modes()) throw ContractError("gibbs_state: wrong mode count");
    const double kt = thermal_energy(temperature);
    std::vector<double> ratio;
    for (double e : energies) ratio.push_back(1.0 / std::expm1((e - mu) / kt));
    return thermal_product_state(space, ratio);
}

/// Sparse superoperator acting on column-stacked vec(rho): vec(A rho B) =
/// (B^T kron A) vec(rho). Rates are converted to 1/ps, so time is in ps.
class Superoperator {
  public:
    Superoperator(FockSpace space, SparseOp matrix) : m_space(space), m_matrix(std::move(matrix)) {}

    const FockSpace &space() const { return m_space; }
    const SparseOp &matrix() const { return m_matrix; }
    Eigen::MatrixXcd dense() const { return Eigen::MatrixXcd(m_matrix); }

    Eigen::MatrixXcd apply(const Eigen::MatrixXcd &rho) const {
        const auto d = rho.rows();
        const Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(rho.data(), d * d);
        const Eigen::VectorXcd out = m_matrix * v;
        return Eigen::Map<const Eigen::MatrixXcd>(out.data(), d, d);
    }

    DensityMatrix apply(const DensityMatrix &rho) const { return DensityMatrix(m_space, apply(rho.matrix())); }

    /// Max column sum of |L|, used to choose Taylor substeps.
    double one_norm() const {
        double best = 0.0;
        for (Eigen::Index k = 0; k < m_matrix.outerSize(); ++k) {
            double s = 0.0;
            for (SparseOp::InnerIterator it(m_matrix, k); it; ++it) s += std::abs(it.value());
            best = std::max(best, s);
        }
        return best;
    }

  private:
    FockSpace m_space;
    SparseOp m_matrix;
};

namespace detail {

inline void kron_into(const SparseOp &left, const SparseOp &right, Complex scale,
                      std::vector<Eigen::Triplet<Complex>> &out) {
    const Eigen::Index rd = right.rows();
    for (Eigen::Index kl = 0; kl < left.outerSize(); ++kl)
        for (SparseOp::InnerIterator il(left, kl); il; ++il)
            for (Eigen::Index kr = 0; kr < right.outerSize(); ++kr)
                for (SparseOp::InnerIterator ir(right, kr); ir; ++ir)
                    out.emplace_back(static_cast<int>(il.row() * rd + ir.row()), static_cast<int>(il.col() * rd + ir.col()),
                                     scale * il.value() * ir.value());
}

} // namespace detail

/// Thermalisation Lindbladian
///   L(rho) = sum_ab (g_ab / 2) [2 a_b a_a^+ rho a_a a_b^+
///            - a_a a_b^+ a_b a_a^+ rho - rho a_a a_b^+ a_b a_a^+]
/// with truncated ladder operators. Mode a of the rate matrix maps to mode a
/// of the space.
inline Superoperator build_thermal_lindbladian(const FockSpace &space, const RateMatrix &rates) {
    if (rates.size() != space.n_modes())
        throw ContractError("build_thermal_lindbladian: rate matrix has " + std::to_string(rates.size()) +
                            " modes, space has " + std::to_string(space.n_modes()));
    const auto d = static_cast<Eigen::Index>(space.dimension());
    SparseOp identity(d, d);
    identity.setIdentity();

    std::vector<SparseOp> annihilate, create;
    for (std::size_t a = 0; a < space.n_modes(); ++a) {
        annihilate.push_back(space.annihilation(a));
        create.push_back(SparseOp(annihilate.back().adjoint()));
    }

    std::vector<Eigen::Triplet<Complex>> trip;
    for (std::size_t a = 0; a < space.n_modes(); ++a) {
        for (std::size_t b = 0; b < space.n_modes(); ++b) {
            const double g = rate_to_inverse_ps(rates(a, b));
            if (g == 0.0) continue;
            const SparseOp jump = annihilate[b] * create[a];       // a_b a_a^+
            const SparseOp jump_dag = annihilate[a] * create[b];   // a_a a_b^+
            const SparseOp loss = SparseOp(jump_dag * jump);        // a_a a_b^+ a_b a_a^+
            const SparseOp loss_t = SparseOp(loss.transpose());
            const SparseOp jump_dag_t = SparseOp(jump_dag.transpose());
            detail::kron_into(jump_dag_t, jump, Complex(g, 0.0), trip);       // jump rho jump^+
            detail::kron_into(identity, loss, Complex(-0.5 * g, 0.0), trip);  // loss rho
            detail::kron_into(loss_t, identity, Complex(-0.5 * g, 0.0), trip); // rho loss
        }
    }
    SparseOp l(d * d, d * d);
    l.setFromTriplets(trip.begin(), trip.end());
    l.prune(Complex(0.0, 0.0));
    return Superoperator(space, std::move(l));
}

struct EvolutionResult {
    DensityMatrix rho;
    double boundary_population = 0.0;
    std::vector<std::string> warnings;
};

/// rho(t) = exp(t L) rho0 by Taylor series on substeps with ||h L||_1 <= 1.
inline EvolutionResult evolve_exact(const DensityMatrix &rho0, const Superoperator &superop, double t) {
    if (!(t >= 0.0)) throw ContractError("evolve_exact: t must be >= 0");
    const auto d = static_cast<Eigen::Index>(rho0.space().dimension());
    Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(rho0.matrix().data(), d * d);
    const double norm = superop.one_norm();
    if (t > 0.0 && norm > 0.0) {
        const auto steps = static_cast<long>(std::max(1.0, std::ceil(t * norm)));
        const double h = t / static_cast<double>(steps);
        Eigen::VectorXcd term(v.size()), next(v.size());
        for (long s = 0; s < steps; ++s) {
            term = v;
            for (int k = 1; k <= 60; ++k) {
                next = superop.matrix() * term;
                term = next * (h / k);
                v += term;
                if (term.cwiseAbs().maxCoeff() <= 1e-18 * v.cwiseAbs().maxCoeff()) break;
            }
        }
    }
    Eigen::MatrixXcd rho = Eigen::Map<const Eigen::MatrixXcd>(v.data(), d, d);
    EvolutionResult out{DensityMatrix(rho0.space(), std::move(rho)), 0.0, {}};
    out.boundary_population = out.rho.boundary_population();
    if (out.boundary_population > 1e-6) {
        out.warnings.push_back("cutoff saturation: boundary population " + std::to_string(out.boundary_population) +
                               " exceeds 1e-6; raise the Fock cutoff");
    }
    return out;
}

struct TrajectoryPoint {
    double time = 0.0;
    DensityMatrix rho;
};

/// Samples exp(t L) rho0 at each (non-decreasing) time.
inline std::vector<TrajectoryPoint> evolve_trajectory(const DensityMatrix &rho0, const Superoperator &superop,
                                                      const std::vector<double> &times) {
    std::vector<TrajectoryPoint> out;
    DensityMatrix current = rho0;
    double t_prev = 0.0;
    for (double t : times) {
        if (t < t_prev) throw ContractError("evolve_trajectory: times must be non-decreasing and >= 0");
        current = evolve_exact(current, superop, t - t_prev).rho;
        out.push_back({t, current});
        t_prev = t;
    }
    return out;
}

struct ClosureEntry {
    double time = 0.0;
    std::size_t mode = 0;
    double exact = 0.0;        // 1/ps, from second moments
    double mean_field = 0.0;   // 1/ps, from products of <n>
    double absolute = 0.0;
    double relative = 0.0;
    double truncation_defect = 0.0; // tr(n L rho) - exact; nonzero only with boundary population
};

struct ClosureReport {
    std::vector<ClosureEntry> entries;

    double max_absolute() const {
        double m = 0.0;
        for (const auto &e : entries) m = std::max(m, e.absolute);
        return m;
    }
};

/// Exact moment derivative of <n_a> against the mean-field closure.
inline double exact_moment_derivative(const DensityMatrix &rho, const RateMatrix &rates, std::size_t a) {
    double s = 0.0;
    for (std::size_t b = 0; b < rates.size(); ++b) {
        if (b == a) continue;
        s += rate_to_inverse_ps(rates(a, b)) * rho.expect_gain_moment(a, b) -
             rate_to_inverse_ps(rates(b, a)) * rho.expect_gain_moment(b, a);
    }
    return s;
}

inline double mean_field_derivative(const DensityMatrix &rho, const RateMatrix &rates, std::size_t a) {
    const double na = rho.expect_number(a);
    double s = 0.0;
    for (std::size_t b = 0; b < rates.size(); ++b) {
        if (b == a) continue;
        const double nb = rho.expect_number(b);
        s += rate_to_inverse_ps(rates(a, b)) * (na + 1.0) * nb - rate_to_inverse_ps(rates(b, a)) * (nb + 1.0) * na;
    }
    return s;
}

inline ClosureReport closure_error(const std::vector<TrajectoryPoint> &trajectory, const RateMatrix &rates,
                                   const Superoperator &superop) {
    ClosureReport report;
    for (const auto &point : trajectory) {
        const DensityMatrix l_rho = superop.apply(point.rho);
        for (std::size_t a = 0; a < rates.size(); ++a) {
            ClosureEntry e;
            e.time = point.time;
            e.mode = a;
            e.exact = exact_moment_derivative(point.rho, rates, a);
            e.mean_field = mean_field_derivative(point.rho, rates, a);
            e.absolute = std::abs(e.exact - e.mean_field);
            const double scale = std::max(std::abs(e.exact), std::abs(e.mean_field));
            e.relative = scale > 0.0 ? e.absolute / scale : 0.0;
            double direct = 0.0;
            for (std::size_t i = 0; i < point.rho.space().dimension(); ++i)
                direct += l_rho.matrix()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real() *
                          point.rho.space().occupation(i, a);
            e.truncation_defect = direct - e.exact;
            report.entries.push_back(e);
        }
    }
    return report;
}

} // namespace photherm::oracle

#endif // PHOTHERM_LINDBLAD_HPP
