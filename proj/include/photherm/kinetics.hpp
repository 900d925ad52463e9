#ifndef PHOTHERM_KINETICS_HPP
#define PHOTHERM_KINETICS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "equilibrium.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "rates.hpp"
#include "units.hpp"

namespace photherm {

struct KineticState {
    Eigen::VectorXd occupations;
    double time = 0.0; // ps

    double total() const { return occupations.sum(); }
};

/// Open-cavity extension: incoherent injection and linear loss, both in 1/ps.
struct DriveSpec {
    Eigen::VectorXd pump;
    Eigen::VectorXd loss;
    bool pump_enabled = false;
    bool loss_enabled = false;

    static DriveSpec none(std::size_t modes) {
        const auto n = static_cast<Eigen::Index>(modes);
        return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), false, false};
    }

    /// Losses from CavityMode::loss (meV), pump given per mode in 1/ps.
    static DriveSpec from_modes(const CavityModeSet &modes, Eigen::VectorXd pump) {
        DriveSpec d = none(modes.size());
        for (std::size_t i = 0; i < modes.size(); ++i)
            d.loss(static_cast<Eigen::Index>(i)) = rate_to_inverse_ps(modes[i].loss);
        d.loss_enabled = d.loss.size() > 0 && d.loss.maxCoeff() > 0.0;
        if (pump.size() != d.loss.size()) throw ContractError("DriveSpec: pump length must match mode count");
        d.pump = std::move(pump);
        d.pump_enabled = d.pump.size() > 0 && d.pump.maxCoeff() > 0.0;
        d.validate();
        return d;
    }

    void validate() const {
        if (pump.size() != loss.size()) throw ContractError("DriveSpec: pump and loss lengths differ");
        for (Eigen::Index i = 0; i < pump.size(); ++i) {
            if (!(pump(i) >= 0.0)) throw ValidationError("DriveSpec: pump entries must be >= 0");
            if (!(loss(i) >= 0.0)) throw ValidationError("DriveSpec: loss entries must be >= 0");
        }
    }

    bool active() const {
        return (pump_enabled && pump.size() > 0 && pump.maxCoeff() > 0.0) ||
               (loss_enabled && loss.size() > 0 && loss.maxCoeff() > 0.0);
    }
};

namespace detail {

inline void require_dimension(Eigen::Index n, std::size_t m, const char *who) {
    if (static_cast<std::size_t>(n) != m)
        throw ContractError(std::string(who) + ": state has " + std::to_string(n) + " modes, rates have " +
                            std::to_string(m));
}

/// Pairwise-flux form of the kinetic term with rates already in 1/ps.
inline void thermalization_flux(const Eigen::VectorXd &n, const Eigen::MatrixXd &g, Eigen::VectorXd &out) {
    const Eigen::Index m = n.size();
    out.setZero(m);
    for (Eigen::Index b = 0; b < m; ++b) {
        const double nb = n(b);
        for (Eigen::Index a = 0; a < b; ++a) {
            const double na = n(a);
            const double flux = g(a, b) * (na + 1.0) * nb - g(b, a) * (nb + 1.0) * na;
            out(a) += flux;
            out(b) -= flux;
        }
    }
}

inline void drive_terms(const Eigen::VectorXd &n, const DriveSpec &drive, Eigen::VectorXd &out) {
    if (drive.pump_enabled) out += drive.pump;
    if (drive.loss_enabled) out -= drive.loss.cwiseProduct(n);
}

} // namespace detail

/// dn/dt from thermalisation alone, in 1/ps.
inline Eigen::VectorXd thermalization_rhs(const KineticState &state, const RateMatrix &rates) {
    detail::require_dimension(state.occupations.size(), rates.size(), "thermalization_rhs");
    Eigen::VectorXd out;
    detail::thermalization_flux(state.occupations, rates.gamma() * kMeVToInversePs, out);
    return out;
}

inline Eigen::VectorXd full_rhs(const KineticState &state, const RateMatrix &rates, const DriveSpec &drive) {
    detail::require_dimension(state.occupations.size(), rates.size(), "full_rhs");
    detail::require_dimension(drive.pump.size(), rates.size(), "full_rhs (drive)");
    Eigen::VectorXd out = thermalization_rhs(state, rates);
    detail::drive_terms(state.occupations, drive, out);
    return out;
}

/// Sum of |individual flux terms|, the natural scale for conservation checks.
inline double thermalization_term_scale(const KineticState &state, const RateMatrix &rates) {
    const auto &n = state.occupations;
    const Eigen::MatrixXd g = rates.gamma() * kMeVToInversePs;
    double s = 0.0;
    for (Eigen::Index a = 0; a < n.size(); ++a)
        for (Eigen::Index b = 0; b < n.size(); ++b)
            s += std::abs(g(a, b) * (n(a) + 1.0) * n(b)) + std::abs(g(b, a) * (n(b) + 1.0) * n(a));
    return s;
}

struct IntegrationOptions {
    double t_final = 0.0;        // ps
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    std::optional<double> sample_interval; // ps; default: only start and end
    std::size_t max_steps = 50'000'000;
    std::optional<double> initial_step;
    std::optional<double> max_step;
    /// Invoked after every accepted step with (time, occupations).
    std::function<void(double, const Eigen::VectorXd &)> on_step;
};

struct ClipEvent {
    double time = 0.0;
    std::size_t mode = 0;
    double value = 0.0;
};

struct Trajectory {
    std::vector<KineticState> samples;
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;
    std::size_t rhs_evaluations = 0;
    std::vector<ClipEvent> clip_events;
    double min_occupation = std::numeric_limits<double>::infinity();

    const KineticState &final_state() const { return samples.back(); }
};

namespace detail {

// Dormand-Prince 5(4) tableau.
struct DormandPrince {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    // b - b_hat
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
};

} // namespace detail

/// Adaptive Dormand-Prince 5(4) integration of the kinetic equation.
/// Steps are shortened to land exactly on sampling times. Sampled states are
/// clipped at zero; excursions below -abs_tol are logged as ClipEvents.
inline Trajectory integrate(const KineticState &initial, const RateMatrix &rates, const DriveSpec &drive,
                            const IntegrationOptions &opts) {
    using DP = detail::DormandPrince;
    const Eigen::Index m = initial.occupations.size();
    detail::require_dimension(m, rates.size(), "integrate");
    detail::require_dimension(drive.pump.size(), rates.size(), "integrate (drive)");
    if (!(opts.t_final > initial.time)) throw ContractError("integrate: t_final must exceed the initial time");
    if (!(opts.rel_tol > 0.0) || !(opts.abs_tol > 0.0)) throw ContractError("integrate: tolerances must be > 0");
    if (opts.sample_interval && !(*opts.sample_interval > 0.0))
        throw ContractError("integrate: sample_interval must be > 0");

    const Eigen::MatrixXd g = rates.gamma() * kMeVToInversePs;
    Trajectory traj;
    auto rhs = [&](const Eigen::VectorXd &n, Eigen::VectorXd &out) {
        detail::thermalization_flux(n, g, out);
        detail::drive_terms(n, drive, out);
        ++traj.rhs_evaluations;
    };

    const double t0 = initial.time;
    const double t_end = opts.t_final;
    std::vector<double> sample_times;
    if (opts.sample_interval) {
        const double dt = *opts.sample_interval;
        const auto count = static_cast<std::size_t>(std::floor((t_end - t0) / dt + 1e-9));
        for (std::size_t k = 0; k <= count; ++k) sample_times.push_back(std::min(t0 + static_cast<double>(k) * dt, t_end));
        if (sample_times.back() < t_end) sample_times.push_back(t_end);
    } else {
        sample_times = {t0, t_end};
    }

    auto record = [&](double t, const Eigen::VectorXd &n) {
        KineticState s{n, t};
        for (Eigen::Index i = 0; i < m; ++i) {
            if (s.occupations(i) < 0.0) {
                if (s.occupations(i) < -opts.abs_tol) traj.clip_events.push_back({t, static_cast<std::size_t>(i), s.occupations(i)});
                s.occupations(i) = 0.0;
            }
        }
        traj.samples.push_back(std::move(s));
    };

    Eigen::VectorXd y = initial.occupations;
    double t = t0;
    std::size_t next_sample = 1;
    record(t, y);
    if (m > 0) traj.min_occupation = y.minCoeff();

    Eigen::VectorXd k1(m), k2(m), k3(m), k4(m), k5(m), k6(m), k7(m), tmp(m), y_new(m), err(m);
    rhs(y, k1);

    auto error_norm = [&](const Eigen::VectorXd &e, const Eigen::VectorXd &a, const Eigen::VectorXd &b) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            const double sc = opts.abs_tol + opts.rel_tol * std::max(std::abs(a(i)), std::abs(b(i)));
            const double r = e(i) / sc;
            s += r * r;
        }
        return m > 0 ? std::sqrt(s / static_cast<double>(m)) : 0.0;
    };

    double h;
    if (opts.initial_step) {
        h = *opts.initial_step;
    } else {
        // Hairer-Wanner starting step heuristic.
        Eigen::VectorXd zero = Eigen::VectorXd::Zero(m);
        const double d0 = error_norm(y, y, zero);
        const double d1 = error_norm(k1, y, zero);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, t_end - t0);
        tmp = y + h0 * k1;
        rhs(tmp, k2);
        const double d2 = error_norm(k2 - k1, y, zero) / h0;
        const double dmax = std::max(d1, d2);
        const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 1.0 / 5.0);
        h = std::min(100.0 * h0, h1);
    }
    if (opts.max_step) h = std::min(h, *opts.max_step);

    const double safety = 0.9, fac_min = 0.2, fac_max = 5.0;
    double err_prev = 1e-4; // PI controller memory
    while (t < t_end) {
        if (traj.accepted_steps + traj.rejected_steps >= opts.max_steps)
            throw StiffnessError("integrate: exceeded max_steps = " + std::to_string(opts.max_steps) +
                                 " at t = " + std::to_string(t) +
                                 " ps; the problem is stiff, consider a larger degenerate epsilon");
        const double target = sample_times[next_sample];
        const double h_try = std::min(h, target - t);
        const bool lands = h_try >= target - t;
        if (h_try <= 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t)))
            throw StiffnessError("integrate: step size underflow at t = " + std::to_string(t) +
                                 " ps; the problem is stiff, consider a larger degenerate epsilon");

        tmp = y + h_try * (DP::a21 * k1);
        rhs(tmp, k2);
        tmp = y + h_try * (DP::a31 * k1 + DP::a32 * k2);
        rhs(tmp, k3);
        tmp = y + h_try * (DP::a41 * k1 + DP::a42 * k2 + DP::a43 * k3);
        rhs(tmp, k4);
        tmp = y + h_try * (DP::a51 * k1 + DP::a52 * k2 + DP::a53 * k3 + DP::a54 * k4);
        rhs(tmp, k5);
        tmp = y + h_try * (DP::a61 * k1 + DP::a62 * k2 + DP::a63 * k3 + DP::a64 * k4 + DP::a65 * k5);
        rhs(tmp, k6);
        y_new = y + h_try * (DP::b1 * k1 + DP::b3 * k3 + DP::b4 * k4 + DP::b5 * k5 + DP::b6 * k6);
        rhs(y_new, k7);
        err = h_try * (DP::e1 * k1 + DP::e3 * k3 + DP::e4 * k4 + DP::e5 * k5 + DP::e6 * k6 + DP::e7 * k7);
        const double en = error_norm(err, y, y_new);

        if (en <= 1.0 && std::isfinite(en)) {
            t = lands ? target : t + h_try;
            y = y_new;
            k1 = k7;
            ++traj.accepted_steps;
            if (m > 0) traj.min_occupation = std::min(traj.min_occupation, y.minCoeff());
            if (opts.on_step) opts.on_step(t, y);
            while (next_sample < sample_times.size() && sample_times[next_sample] <= t) {
                record(sample_times[next_sample], y);
                ++next_sample;
            }
            const double e = std::max(en, 1e-10);
            double fac = safety * std::pow(e, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
            fac = std::clamp(fac, fac_min, fac_max);
            err_prev = e;
            // A step clipped to land on a sample does not shrink the proposal.
            h = lands ? std::max(h, h_try * fac) : h_try * fac;
        } else {
            ++traj.rejected_steps;
            const double e = std::isfinite(en) ? en : 1e10;
            h = h_try * std::max(fac_min, safety * std::pow(e, -1.0 / 5.0));
        }
        if (opts.max_step) h = std::min(h, *opts.max_step);
    }
    return traj;
}

struct SteadyStateOptions {
    double residual_tol = 1e-10; // 1/ps, max-norm
    int max_iterations = 200;
    std::optional<Eigen::VectorXd> initial_guess;
};

struct SteadyStateResult {
    KineticState state;
    double residual = 0.0; // max-norm of full_rhs, 1/ps
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline bool rates_connected(const RateMatrix &rates) {
    const auto n = static_cast<Eigen::Index>(rates.size());
    if (n <= 1) return true;
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    std::vector<Eigen::Index> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
        const Eigen::Index a = stack.back();
        stack.pop_back();
        for (Eigen::Index b = 0; b < n; ++b) {
            if (!seen[static_cast<std::size_t>(b)] && (rates.gamma()(a, b) > 0.0 || rates.gamma()(b, a) > 0.0)) {
                seen[static_cast<std::size_t>(b)] = true;
                stack.push_back(b);
            }
        }
    }
    return std::all_of(seen.begin(), seen.end(), [](bool s) { return s; });
}

/// Jacobian of thermalisation + drive with rates in 1/ps.
inline Eigen::MatrixXd kinetic_jacobian(const Eigen::VectorXd &n, const Eigen::MatrixXd &g, const DriveSpec &drive) {
    const Eigen::Index m = n.size();
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
        double diag = 0.0;
        for (Eigen::Index b = 0; b < m; ++b) {
            if (b == a) continue;
            diag += g(a, b) * n(b) - g(b, a) * (n(b) + 1.0);
            jac(a, b) = g(a, b) * (n(a) + 1.0) - g(b, a) * n(a);
        }
        jac(a, a) = diag;
        if (drive.loss_enabled) jac(a, a) -= drive.loss(a);
    }
    return jac;
}

inline SteadyStateResult newton_steady_state(Eigen::VectorXd n, const Eigen::MatrixXd &g, const DriveSpec &drive,
                                             const SteadyStateOptions &opts) {
    Eigen::VectorXd f;
    auto residual = [&](const Eigen::VectorXd &x, Eigen::VectorXd &out) {
        thermalization_flux(x, g, out);
        drive_terms(x, drive, out);
        return out.size() > 0 ? out.cwiseAbs().maxCoeff() : 0.0;
    };
    double res = residual(n, f);
    SteadyStateResult best{{n, 0.0}, res, 0, res < opts.residual_tol};
    Eigen::VectorXd trial, f_trial;
    for (int it = 1; it <= opts.max_iterations && !best.converged; ++it) {
        const Eigen::MatrixXd jac = kinetic_jacobian(n, g, drive);
        const Eigen::VectorXd step = jac.fullPivLu().solve(-f);
        if (!step.allFinite()) break;
        double lambda = 1.0;
        // keep occupations non-negative
        for (Eigen::Index i = 0; i < n.size(); ++i)
            if (step(i) < 0.0 && n(i) + lambda * step(i) < 0.0) lambda = std::min(lambda, 0.99 * n(i) / -step(i));
        bool improved = false;
        for (int ls = 0; ls < 40; ++ls, lambda *= 0.5) {
            trial = n + lambda * step;
            const double r = residual(trial, f_trial);
            if (std::isfinite(r) && (r < res || r < opts.residual_tol)) {
                n = trial;
                f = f_trial;
                res = r;
                improved = true;
                break;
            }
        }
        best.iterations = it;
        if (res < best.residual) {
            best.state.occupations = n;
            best.residual = res;
        }
        best.converged = best.residual < opts.residual_tol;
        if (!improved) break;
    }
    return best;
}

} // namespace detail

/// Fixed point of the kinetics. A closed system (n_total given, drive
/// inactive) returns the Bose-Einstein point; an open system is solved
/// by damped Newton iteration on full_rhs = 0.
inline SteadyStateResult steady_state(const RateMatrix &rates, const DriveSpec &drive,
                                      std::optional<double> n_total = std::nullopt,
                                      const SteadyStateOptions &opts = {}) {
    detail::require_dimension(drive.pump.size(), rates.size(), "steady_state");
    if (!drive.active()) {
        if (!n_total) throw ContractError("steady_state: a closed system needs N_total");
        if (!detail::rates_connected(rates))
            throw ContractError("steady_state: rate graph is disconnected; the closed-system fixed point is not unique");
        const auto eq = solve_chemical_potential(rates.energies(), rates.temperature(), *n_total);
        SteadyStateResult r;
        r.state = {eq.occupations, 0.0};
        r.residual = thermalization_rhs(r.state, rates).cwiseAbs().maxCoeff();
        r.iterations = eq.iterations;
        r.converged = eq.converged;
        return r;
    }

    const Eigen::MatrixXd g = rates.gamma() * kMeVToInversePs;
    Eigen::VectorXd guess;
    if (opts.initial_guess) {
        guess = *opts.initial_guess;
    } else {
        guess = Eigen::VectorXd::Zero(drive.pump.size());
        for (Eigen::Index i = 0; i < guess.size(); ++i)
            if (drive.loss_enabled && drive.loss(i) > 0.0 && drive.pump_enabled) guess(i) = drive.pump(i) / drive.loss(i);
    }
    auto result = detail::newton_steady_state(guess, g, drive, opts);
    if (result.converged) return result;

    // Relax towards the attractor by time integration, then polish.
    double slowest = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < drive.loss.size(); ++i)
        if (drive.loss_enabled && drive.loss(i) > 0.0) slowest = std::min(slowest, drive.loss(i));
    if (!std::isfinite(slowest)) return result;
    IntegrationOptions io;
    io.t_final = 50.0 / slowest;
    io.rel_tol = 1e-9;
    io.abs_tol = 1e-12;
    io.max_steps = 200'000;
    try {
        const auto traj = integrate(KineticState{result.state.occupations.cwiseMax(0.0), 0.0}, rates, drive, io);
        auto polished = detail::newton_steady_state(traj.final_state().occupations, g, drive, opts);
        polished.iterations += result.iterations;
        if (polished.residual < result.residual) return polished;
    } catch (const NumericalError &) {
    }
    return result;
}

} // namespace photherm

#endif // PHOTHERM_KINETICS_HPP
