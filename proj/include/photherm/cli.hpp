#ifndef PHOTHERM_CLI_HPP
#define PHOTHERM_CLI_HPP

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "equilibrium.hpp"
#include "io.hpp"
#include "kinetics.hpp"
#include "lindblad.hpp"
#include "rates.hpp"
#include "threshold.hpp"

namespace photherm::cli {

using json = nlohmann::json;

inline constexpr const char *kToolName = "photherm";
inline constexpr const char *kToolVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitNumerical = 3 };

struct RunRequest {
    std::string subcommand; // rates | evolve | equilibrium | threshold-scan | oracle-check
    std::string config_text;
    std::filesystem::path out_dir;
    std::optional<std::string> format; // overrides output.format
    std::optional<std::uint64_t> seed; // overrides the config seed
};

struct RunResult {
    int exit_code = kExitOk;
    std::vector<std::string> messages;
    std::vector<std::string> files;
};

struct OutputFile {
    std::string name;
    std::string content;
};

struct Products {
    std::vector<OutputFile> files;
    json diagnostics = json::object();
};

namespace detail {

inline void require_sections(const config::ScenarioConfig &cfg, const std::string &sub,
                             const std::vector<std::string> &needed) {
    std::vector<config::ConfigIssue> issues;
    for (const auto &s : needed) {
        const bool present = (s == "modes" && cfg.modes) || (s == "ensemble" && cfg.ensemble) || (s == "bath" && cfg.bath) ||
                             (s == "evolve" && cfg.evolve) || (s == "equilibrium" && cfg.equilibrium) ||
                             (s == "threshold_scan" && cfg.threshold_scan) || (s == "oracle" && cfg.oracle);
        if (!present)
            issues.push_back({config::ConfigIssue::Kind::Schema, s, "section is required by '" + sub + "'", 0, 0});
    }
    if (!issues.empty()) throw config::ConfigError(std::move(issues));
}

inline json weak_coupling_json(const WeakCouplingReport &report) {
    json modes = json::array();
    for (const auto &m : report.modes)
        modes.push_back({{"mode_id", m.mode_id},
                         {"rabi_below_broadening", m.rabi_below_broadening},
                         {"broadening_below_detuning", m.broadening_below_detuning},
                         {"rabi_margin_meV", m.rabi_margin},
                         {"detuning_margin_meV", m.detuning_margin}});
    return {{"passed", report.passed()}, {"modes", modes}};
}

inline json linewidth_json(const VibrationalBath &bath) {
    const auto b = linewidth_branches(bath, bath.temperature);
    return {{"low_t_meV", b.low_t},
            {"high_t_meV", io::optional_json(b.high_t)},
            {"high_branch_selected", b.high_branch_selected},
            {"crossover_temperature_K", b.crossover_temperature}};
}

struct Assembled {
    MolecularEnsemble ensemble;
    RateMatrix rates;
};

inline Assembled assemble(const config::ScenarioConfig &cfg, std::optional<std::uint64_t> seed, Products &p) {
    auto ensemble = config::build_ensemble(cfg, std::nullopt, std::nullopt, seed);
    auto rates = assemble_rate_matrix(*cfg.modes, ensemble, *cfg.bath, cfg.assembly);
    p.diagnostics["weak_coupling"] = weak_coupling_json(validate_weak_coupling(*cfg.modes, ensemble, *cfg.bath));
    p.diagnostics["linewidth"] = linewidth_json(*cfg.bath);
    p.diagnostics["rate_invariant_issues"] = check_rate_invariants(rates);
    p.diagnostics["nonzero_pairs"] = rates.nonzero_pairs();
    return {std::move(ensemble), std::move(rates)};
}

inline Eigen::VectorXd initial_occupations(const config::InitialSpec &spec, const CavityModeSet &modes,
                                           const VibrationalBath &bath, std::optional<std::uint64_t> seed) {
    const auto m = static_cast<Eigen::Index>(modes.size());
    Eigen::VectorXd n = Eigen::VectorXd::Zero(m);
    if (spec.kind == "occupations") {
        for (Eigen::Index i = 0; i < m; ++i) n(i) = spec.values[static_cast<std::size_t>(i)];
    } else if (spec.kind == "single_mode") {
        const std::size_t idx = spec.mode_id ? modes.index_of(*spec.mode_id) : modes.size() - 1;
        n(static_cast<Eigen::Index>(idx)) = spec.n_total;
    } else if (spec.kind == "uniform") {
        n.setConstant(spec.n_total / static_cast<double>(m));
    } else if (spec.kind == "random") {
        if (!seed) throw ConfigurationError("a random initial state requires a seed (config key 'seed' or --seed)");
        std::mt19937_64 rng(*seed ^ 0x9e3779b97f4a7c15ULL);
        std::exponential_distribution<double> weight(1.0);
        for (Eigen::Index i = 0; i < m; ++i) n(i) = weight(rng);
        n *= spec.n_total / n.sum();
    } else { // bose_einstein
        n = solve_chemical_potential(modes, bath.temperature, spec.n_total).occupations;
    }
    return n;
}

inline DriveSpec drive_for(const config::ScenarioConfig &cfg) {
    const auto &modes = *cfg.modes;
    Eigen::VectorXd pump = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(modes.size()));
    if (!cfg.drive) return DriveSpec::none(modes.size());
    const auto &d = *cfg.drive;
    if (!d.pump.empty()) {
        for (std::size_t i = 0; i < d.pump.size(); ++i) pump(static_cast<Eigen::Index>(i)) = d.pump[i];
    } else if (d.top_modes) {
        const auto k = std::min(*d.top_modes, modes.size());
        for (std::size_t i = modes.size() - k; i < modes.size(); ++i) pump(static_cast<Eigen::Index>(i)) = d.top_rate;
    }
    DriveSpec spec = DriveSpec::from_modes(modes, pump);
    if (!d.loss) spec.loss_enabled = false;
    return spec;
}

inline Products run_rates(const config::ScenarioConfig &cfg, const std::string &format,
                          std::optional<std::uint64_t> seed) {
    require_sections(cfg, "rates", {"modes", "ensemble", "bath"});
    Products p;
    const auto a = assemble(cfg, seed, p);
    if (format == "json") p.files.push_back({"rates.json", io::rate_matrix_json(a.rates).dump(2) + "\n"});
    else p.files.push_back({"rates.csv", io::rate_matrix_csv(a.rates)});
    return p;
}

inline Products run_evolve(const config::ScenarioConfig &cfg, const std::string &format,
                           std::optional<std::uint64_t> seed) {
    require_sections(cfg, "evolve", {"modes", "ensemble", "bath", "evolve"});
    Products p;
    const auto a = assemble(cfg, seed, p);
    const auto &ev = *cfg.evolve;
    const auto drive = drive_for(cfg);
    IntegrationOptions opts;
    opts.t_final = ev.t_final;
    opts.rel_tol = ev.rel_tol;
    opts.abs_tol = ev.abs_tol;
    opts.sample_interval = ev.sample_every;
    const KineticState initial{initial_occupations(ev.initial, *cfg.modes, *cfg.bath, seed), 0.0};
    const auto traj = integrate(initial, a.rates, drive, opts);

    const auto ids = cfg.modes->ids();
    if (format == "json") p.files.push_back({"trajectory.json", io::trajectory_json(traj, ids).dump(2) + "\n"});
    else p.files.push_back({"trajectory.csv", io::trajectory_csv(traj, ids)});

    const double n0 = initial.total();
    const double n1 = traj.final_state().total();
    p.diagnostics["integration"] = {{"accepted_steps", traj.accepted_steps},
                                    {"rejected_steps", traj.rejected_steps},
                                    {"rhs_evaluations", traj.rhs_evaluations},
                                    {"clip_events", traj.clip_events.size()},
                                    {"min_occupation", traj.min_occupation},
                                    {"drive_active", drive.active()},
                                    {"relative_number_drift", drive.active() || n0 == 0.0 ? json(nullptr)
                                                                                          : json(std::abs(n1 - n0) / n0)}};
    return p;
}

inline Products run_equilibrium(const config::ScenarioConfig &cfg, const std::string &format) {
    require_sections(cfg, "equilibrium", {"modes", "bath", "equilibrium"});
    (void)format;
    Products p;
    const auto eq = solve_chemical_potential(*cfg.modes, cfg.bath->temperature, cfg.equilibrium->n_total);
    if (!eq.converged) throw NumericalError("chemical potential solve did not converge");
    const auto ids = cfg.modes->ids();
    const auto energies = cfg.modes->energies();
    p.files.push_back({"equilibrium.csv", io::equilibrium_csv(eq, ids, energies)});
    json summary = io::equilibrium_json(eq, ids, energies);
    summary["temperature_K"] = cfg.bath->temperature;
    summary["n_total"] = cfg.equilibrium->n_total;
    p.files.push_back({"equilibrium_summary.json", summary.dump(2) + "\n"});
    return p;
}

inline Products run_threshold_scan(const config::ScenarioConfig &cfg, std::optional<std::uint64_t> seed) {
    require_sections(cfg, "threshold-scan", {"modes", "ensemble", "bath", "threshold_scan"});
    const auto &ens = *cfg.ensemble;
    if (!ens.concentration)
        throw config::ConfigError({{config::ConfigIssue::Kind::Schema, "ensemble.concentration",
                                    "required by 'threshold-scan'", 0, 0}});
    if (ens.is_explicit())
        throw config::ConfigError({{config::ConfigIssue::Kind::Schema, "ensemble.molecules",
                                    "explicit molecule lists cannot be rescaled by 'threshold-scan'", 0, 0}});
    for (const auto &m : *cfg.modes)
        if (!(m.loss > 0.0))
            throw config::ConfigError({{config::ConfigIssue::Kind::Physics, "modes",
                                        "every mode needs a positive loss for 'threshold-scan'", 0, 0}});
    const auto &sc = *cfg.threshold_scan;
    ThresholdCriterion crit;
    crit.pumped_modes = sc.pumped_modes;
    crit.fraction = sc.fraction;
    crit.pump_min = sc.pump_min;
    crit.pump_max = sc.pump_max;
    const EnsembleFactory factory = [&](std::uint64_t n, double area) {
        return config::build_ensemble(cfg, n, area, seed);
    };
    const auto scan = threshold_scan(*cfg.modes, factory, *cfg.bath, *ens.concentration, sc.areas, crit, cfg.assembly);
    Products p;
    p.files.push_back({"threshold_scan.csv", io::threshold_scan_csv(scan)});
    p.files.push_back({"threshold_scan.json", io::threshold_scan_json(scan).dump(2) + "\n"});
    std::size_t missing = 0;
    for (const auto &r : scan.rows) missing += r.threshold_pump ? 0 : 1;
    p.diagnostics["threshold"] = {{"rows_without_threshold", missing},
                                  {"pump_units", "multiples of each pumped mode's loss rate"},
                                  {"linewidth", linewidth_json(*cfg.bath)}};
    return p;
}

inline oracle::DensityMatrix oracle_initial(const config::OracleConfig &oc, const oracle::FockSpace &space) {
    const std::size_t k = space.n_modes();
    if (oc.initial_kind == "thermal") {
        std::vector<double> means = oc.initial_values.empty() ? std::vector<double>(k, 0.5) : oc.initial_values;
        return oracle::thermal_product_state(space, means);
    }
    if (oc.initial_kind == "shared_photon") {
        if (k < 2) throw ConfigurationError("oracle.initial: 'shared_photon' needs at least two modes");
        Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(space.dimension()));
        std::vector<int> first(k, 0), second(k, 0);
        first[0] = 1;
        second[1] = 1;
        psi(static_cast<Eigen::Index>(space.index(first))) = 1.0;
        psi(static_cast<Eigen::Index>(space.index(second))) = 1.0;
        return oracle::pure_state(space, psi);
    }
    std::vector<int> occ(k, 0);
    if (oc.initial_values.empty()) {
        occ[k - 1] = 1;
    } else {
        for (std::size_t a = 0; a < k; ++a) {
            const double v = oc.initial_values[a];
            if (v != std::floor(v) || v > space.cutoff())
                throw ConfigurationError("oracle.initial.values: Fock occupations must be integers <= cutoff");
            occ[a] = static_cast<int>(v);
        }
    }
    return oracle::fock_state(space, occ);
}

inline Products run_oracle(const config::ScenarioConfig &cfg, std::optional<std::uint64_t> seed) {
    require_sections(cfg, "oracle-check", {"modes", "ensemble", "bath", "oracle"});
    Products p;
    const auto a = assemble(cfg, seed, p);
    const auto &oc = *cfg.oracle;
    std::vector<std::size_t> idx;
    for (int id : oc.mode_ids) idx.push_back(cfg.modes->index_of(id));
    std::sort(idx.begin(), idx.end());
    if (std::adjacent_find(idx.begin(), idx.end()) != idx.end())
        throw ConfigurationError("oracle.mode_ids: duplicate mode ids");
    const RateMatrix sub = restrict_rates(a.rates, idx);

    const oracle::FockSpace space(idx.size(), oc.cutoff);
    const auto superop = oracle::build_thermal_lindbladian(space, sub);
    const auto rho0 = oracle_initial(oc, space);
    std::vector<double> times;
    for (int i = 0; i < oc.samples; ++i) times.push_back(oc.t_final * i / (oc.samples - 1));
    const auto traj = oracle::evolve_trajectory(rho0, superop, times);
    const auto closure = oracle::closure_error(traj, sub, superop);

    double trace_drift = 0.0, number_drift = 0.0, boundary = 0.0, hermiticity = 0.0;
    const double n_initial = rho0.expect_total_number();
    json samples = json::array();
    for (const auto &pt : traj) {
        trace_drift = std::max(trace_drift, std::abs(pt.rho.trace() - oracle::Complex(1.0, 0.0)));
        number_drift = std::max(number_drift, std::abs(pt.rho.expect_total_number() - n_initial));
        boundary = std::max(boundary, pt.rho.boundary_population());
        hermiticity = std::max(hermiticity, pt.rho.hermiticity_error());
        std::vector<double> n;
        for (std::size_t m = 0; m < space.n_modes(); ++m) n.push_back(pt.rho.expect_number(m));
        samples.push_back({{"time_ps", pt.time}, {"occupations", n}});
    }

    // Second-order one-sided finite difference of <n_a> at t = 0 against tr(n_a L rho0).
    const double norm = superop.one_norm();
    const double h = norm > 0.0 ? 1e-3 / norm : 1e-3;
    const auto r1 = oracle::evolve_exact(rho0, superop, h).rho;
    const auto r2 = oracle::evolve_exact(rho0, superop, 2.0 * h).rho;
    const auto l_rho0 = superop.apply(rho0);
    double fd_error = 0.0;
    json fd_rows = json::array();
    for (std::size_t m = 0; m < space.n_modes(); ++m) {
        const double fd = (-3.0 * rho0.expect_number(m) + 4.0 * r1.expect_number(m) - r2.expect_number(m)) / (2.0 * h);
        double direct = 0.0;
        for (std::size_t i = 0; i < space.dimension(); ++i)
            direct += l_rho0.matrix()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real() *
                      space.occupation(i, m);
        fd_error = std::max(fd_error, std::abs(fd - direct));
        fd_rows.push_back({{"mode", m}, {"finite_difference", fd}, {"generator", direct}});
    }

    std::vector<double> energies;
    for (std::size_t i : idx) energies.push_back(a.rates.energies()[i]);
    json report = {{"mode_ids", sub.mode_ids()},
                   {"energies_meV", energies},
                   {"cutoff", oc.cutoff},
                   {"dimension", space.dimension()},
                   {"initial", oc.initial_kind},
                   {"max_trace_drift", trace_drift},
                   {"max_number_drift", number_drift},
                   {"max_hermiticity_error", hermiticity},
                   {"max_boundary_population", boundary},
                   {"cutoff_saturated", boundary > 1e-6},
                   {"finite_difference", {{"step_ps", h}, {"max_abs_error", fd_error}, {"modes", fd_rows}}},
                   {"closure_max_abs", closure.max_absolute()},
                   {"closure", io::closure_report_json(closure)},
                   {"samples", samples}};
    p.files.push_back({"oracle_report.json", report.dump(2) + "\n"});
    if (boundary > 1e-6)
        p.diagnostics["warnings"].push_back("cutoff saturation: boundary population " + io::format_double(boundary) +
                                            " exceeds 1e-6; raise oracle.cutoff");
    return p;
}

inline void write_file(const std::filesystem::path &path, const std::string &content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << content;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

} // namespace detail

/// Runs one subcommand, writes its outputs and manifest.json into
/// out_dir, and maps failures to exit codes (2 configuration, 3 numerical).
inline RunResult run_subcommand(const RunRequest &req) {
    RunResult result;
    auto fail = [&](int code, const std::string &msg) {
        result.exit_code = code;
        result.messages.push_back(msg);
        return result;
    };

    static const std::vector<std::string> known = {"rates", "evolve", "equilibrium", "threshold-scan", "oracle-check"};
    if (std::find(known.begin(), known.end(), req.subcommand) == known.end())
        return fail(kExitConfig, "unknown subcommand '" + req.subcommand + "'");

    auto parsed = config::parse_config(req.config_text);
    if (!parsed.ok()) {
        result.exit_code = kExitConfig;
        for (const auto &i : parsed.issues) result.messages.push_back(i.describe());
        return result;
    }
    const auto &cfg = *parsed.config;
    const std::string format = req.format.value_or(cfg.format);
    if (format != "csv" && format != "json") return fail(kExitConfig, "format must be csv or json");
    const auto seed = req.seed ? req.seed : cfg.seed;

    Products products;
    try {
        if (req.subcommand == "rates") products = detail::run_rates(cfg, format, seed);
        else if (req.subcommand == "evolve") products = detail::run_evolve(cfg, format, seed);
        else if (req.subcommand == "equilibrium") products = detail::run_equilibrium(cfg, format);
        else if (req.subcommand == "threshold-scan") products = detail::run_threshold_scan(cfg, seed);
        else products = detail::run_oracle(cfg, seed);
    } catch (const config::ConfigError &e) {
        result.exit_code = kExitConfig;
        for (const auto &i : e.issues()) result.messages.push_back(i.describe());
        return result;
    } catch (const ConfigurationError &e) {
        return fail(kExitConfig, std::string("configuration error: ") + e.what());
    } catch (const ValidationError &e) {
        return fail(kExitConfig, std::string("validation error: ") + e.what());
    } catch (const NumericalError &e) {
        return fail(kExitNumerical, std::string("numerical failure: ") + e.what());
    } catch (const SingularityError &e) {
        return fail(kExitNumerical, std::string("numerical failure: ") + e.what());
    } catch (const DomainError &e) {
        return fail(kExitNumerical, std::string("numerical failure: ") + e.what());
    } catch (const std::exception &e) {
        return fail(kExitFailure, std::string("error: ") + e.what());
    }

    try {
        std::filesystem::create_directories(req.out_dir);
        json files = json::array();
        for (const auto &f : products.files) {
            detail::write_file(req.out_dir / f.name, f.content);
            files.push_back({{"name", f.name}, {"fnv1a64", io::fnv1a_hex(f.content)}, {"bytes", f.content.size()}});
            result.files.push_back(f.name);
        }
        json manifest = {{"tool", kToolName},
                         {"version", kToolVersion},
                         {"subcommand", req.subcommand},
                         {"config_fnv1a64", io::fnv1a_hex(req.config_text)},
                         {"seed", seed ? json(*seed) : json(nullptr)},
                         {"format", format},
                         {"files", files},
                         {"diagnostics", products.diagnostics}};
        detail::write_file(req.out_dir / "manifest.json", manifest.dump(2) + "\n");
        result.files.push_back("manifest.json");
    } catch (const std::exception &e) {
        return fail(kExitFailure, std::string("error: ") + e.what());
    }
    return result;
}

} // namespace photherm::cli

#endif // PHOTHERM_CLI_HPP
