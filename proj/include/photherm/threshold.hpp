#ifndef PHOTHERM_THRESHOLD_HPP
#define PHOTHERM_THRESHOLD_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "kinetics.hpp"
#include "model.hpp"
#include "rates.hpp"

namespace photherm {

/// Pump model: the top `pumped_modes` modes by energy receive an injection
/// rate p * loss_alpha (p is dimensionless, injected occupation per loss
/// time). The threshold is the smallest p whose steady state satisfies
/// n_ground >= fraction * N.
struct ThresholdCriterion {
    std::size_t pumped_modes = 1;
    double fraction = 0.1;
    double pump_min = 1e-6;
    double pump_max = 1e8;
    double relative_precision = 1e-6;
};

struct ThresholdPoint {
    std::optional<double> threshold;
    bool converged = false;
    int steady_state_solves = 0;
};

inline DriveSpec threshold_drive(const Eigen::VectorXd &loss_inverse_ps, std::size_t pumped_modes, double p) {
    const Eigen::Index m = loss_inverse_ps.size();
    DriveSpec d = DriveSpec::none(static_cast<std::size_t>(m));
    d.loss = loss_inverse_ps;
    d.loss_enabled = true;
    const auto k = std::min<Eigen::Index>(static_cast<Eigen::Index>(pumped_modes), m);
    for (Eigen::Index i = m - k; i < m; ++i) d.pump(i) = p * loss_inverse_ps(i);
    d.pump_enabled = p > 0.0;
    return d;
}

/// Threshold on a fixed rate matrix; modes are assumed sorted by energy
/// (ground = index 0), as produced by assemble_rate_matrix.
inline ThresholdPoint find_threshold(const RateMatrix &rates, const Eigen::VectorXd &loss_inverse_ps,
                                     const ThresholdCriterion &crit) {
    detail::require_dimension(loss_inverse_ps.size(), rates.size(), "find_threshold");
    for (Eigen::Index i = 0; i < loss_inverse_ps.size(); ++i)
        if (!(loss_inverse_ps(i) > 0.0)) throw ContractError("find_threshold: every mode needs a positive loss");

    ThresholdPoint out;
    std::optional<Eigen::VectorXd> warm;
    auto condensed = [&](double p, bool &ok) {
        SteadyStateOptions so;
        so.initial_guess = warm;
        auto ss = steady_state(rates, threshold_drive(loss_inverse_ps, crit.pumped_modes, p), std::nullopt, so);
        ++out.steady_state_solves;
        ok = ss.converged;
        if (!ok) {
            // retry cold
            ss = steady_state(rates, threshold_drive(loss_inverse_ps, crit.pumped_modes, p));
            ++out.steady_state_solves;
            ok = ss.converged;
        }
        if (ok) warm = ss.state.occupations;
        const auto &n = ss.state.occupations;
        return n(0) >= crit.fraction * n.sum();
    };

    // Walk upwards by decades from pump_min to bracket the threshold.
    double lo = crit.pump_min;
    bool ok = false;
    if (condensed(lo, ok) || !ok) return out;
    double hi = lo;
    bool bracketed = false;
    while (hi < crit.pump_max) {
        lo = hi;
        hi = std::min(hi * 10.0, crit.pump_max);
        if (condensed(hi, ok)) {
            bracketed = ok;
            break;
        }
        if (!ok) return out;
    }
    if (!bracketed) return out;

    bool all_ok = true;
    while (hi / lo - 1.0 > crit.relative_precision) {
        const double mid = std::sqrt(lo * hi);
        if (condensed(mid, ok)) hi = mid;
        else lo = mid;
        all_ok = all_ok && ok;
    }
    out.threshold = hi;
    out.converged = all_ok;
    return out;
}

struct ThresholdRow {
    double area = 0.0; // um^2
    std::uint64_t n_mol = 0;
    std::optional<double> threshold_pump;
    bool converged = false;
};

struct PowerLawFit {
    std::optional<double> exponent;
    std::optional<double> prefactor;
    std::optional<double> r_squared;
};

/// Ordinary least squares of log y against log x.
inline PowerLawFit fit_power_law(const std::vector<double> &x, const std::vector<double> &y) {
    PowerLawFit fit;
    if (x.size() != y.size() || x.size() < 2) return fit;
    const double n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += std::log(x[i]);
        sy += std::log(y[i]);
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx, dy = std::log(y[i]) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) return fit;
    const double slope = sxy / sxx;
    fit.exponent = slope;
    fit.prefactor = std::exp(my - slope * mx);
    fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return fit;
}

struct ThresholdScanResult {
    std::vector<ThresholdRow> rows;
    PowerLawFit fit;
};

/// Builds the ensemble for a given molecule count and illuminated area.
using EnsembleFactory = std::function<MolecularEnsemble(std::uint64_t n_mol, double area)>;

inline ThresholdScanResult threshold_scan(const CavityModeSet &modes, const EnsembleFactory &make_ensemble,
                                          const VibrationalBath &bath, double concentration,
                                          const std::vector<double> &areas, const ThresholdCriterion &crit,
                                          const AssemblyOptions &assembly = {}) {
    if (!(concentration > 0.0)) throw ContractError("threshold_scan: concentration must be > 0");
    Eigen::VectorXd loss(static_cast<Eigen::Index>(modes.size()));
    for (std::size_t i = 0; i < modes.size(); ++i) loss(static_cast<Eigen::Index>(i)) = rate_to_inverse_ps(modes[i].loss);

    ThresholdScanResult out;
    std::vector<double> xs, ys;
    for (double area : areas) {
        if (!(area > 0.0)) throw ContractError("threshold_scan: areas must be > 0");
        ThresholdRow row;
        row.area = area;
        row.n_mol = static_cast<std::uint64_t>(std::llround(concentration * area));
        if (row.n_mol < 1) row.n_mol = 1;
        const auto rates = assemble_rate_matrix(modes, make_ensemble(row.n_mol, area), bath, assembly);
        const auto point = find_threshold(rates, loss, crit);
        row.threshold_pump = point.threshold;
        row.converged = point.converged && point.threshold.has_value();
        if (row.threshold_pump) {
            xs.push_back(area);
            ys.push_back(*row.threshold_pump);
        }
        out.rows.push_back(row);
    }
    out.fit = fit_power_law(xs, ys);
    return out;
}

} // namespace photherm

#endif // PHOTHERM_THRESHOLD_HPP
