#ifndef PHOTHERM_CONFIG_HPP
#define PHOTHERM_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "model.hpp"
#include "rates.hpp"

namespace photherm::config {

using json = nlohmann::json;

struct ConfigIssue {
    enum class Kind { Syntax, Schema, Physics };
    Kind kind = Kind::Schema;
    std::string path; // e.g. "bath.temperature"
    std::string message;
    int line = 0;
    int column = 0;

    std::string describe() const {
        const char *k = kind == Kind::Syntax ? "syntax error" : kind == Kind::Schema ? "schema error" : "physics error";
        std::string out = std::string(k);
        if (line > 0) out += " at line " + std::to_string(line) + ", column " + std::to_string(column);
        if (!path.empty()) out += " [" + path + "]";
        return out + ": " + message;
    }
};

/// Thrown by parse_config_or_throw; carries every issue found.
class ConfigError : public ConfigurationError {
  public:
    explicit ConfigError(std::vector<ConfigIssue> issues)
        : ConfigurationError(summarize(issues)), m_issues(std::move(issues)) {}
    const std::vector<ConfigIssue> &issues() const { return m_issues; }

  private:
    static std::string summarize(const std::vector<ConfigIssue> &issues) {
        std::string s;
        for (const auto &i : issues) s += (s.empty() ? "" : "\n") + i.describe();
        return s;
    }
    std::vector<ConfigIssue> m_issues;
};

struct SpectralSpec {
    std::string kind = "linewidth_estimate"; // | constant | table
    double value = 0.0;
    std::vector<double> omega;
    std::vector<double> table;

    SpectralProduct build(const VibrationalBath &bath) const {
        if (kind == "constant") return SpectralProduct::constant(value, bath.mlfv_cutoff);
        if (kind == "table") return SpectralProduct::tabulated(omega, table, bath.mlfv_cutoff);
        return SpectralProduct::linewidth_estimate(bath.a2, bath.mlfv_cutoff);
    }
};

struct ExplicitMolecule {
    double exciton_energy = 0.0;
    std::vector<double> couplings;
    std::vector<double> phases;
    std::optional<SpectralSpec> spectral;
};

struct EnsembleSpec {
    std::optional<std::uint64_t> n_mol;
    std::optional<double> concentration;
    std::optional<double> area;
    double molecule_size_nm = 1.0;
    std::optional<double> exciton_energy;
    SpectralSpec spectral;
    std::optional<double> disorder_sigma;
    std::vector<ExplicitMolecule> molecules;

    bool is_explicit() const { return !molecules.empty(); }
};

struct DriveConfig {
    std::vector<double> pump; // per mode in energy order, 1/ps
    std::optional<std::size_t> top_modes;
    double top_rate = 0.0;
    bool loss = true;
};

struct InitialSpec {
    std::string kind = "single_mode"; // occupations | single_mode | uniform | random | bose_einstein
    std::vector<double> values;
    std::optional<int> mode_id;
    double n_total = 1.0;
};

struct EvolveConfig {
    double t_final = 0.0;
    std::optional<double> sample_every;
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    InitialSpec initial;
};

struct EquilibriumConfig {
    double n_total = 1.0;
};

struct ScanConfig {
    std::vector<double> areas;
    std::size_t pumped_modes = 1;
    double fraction = 0.1;
    double pump_min = 1e-6;
    double pump_max = 1e8;
};

struct OracleConfig {
    std::vector<int> mode_ids;
    int cutoff = 6;
    double t_final = 1.0;
    int samples = 11;
    std::string initial_kind = "fock"; // fock | thermal | shared_photon
    std::vector<double> initial_values;
};

struct ScenarioConfig {
    std::string source_text;
    std::optional<std::uint64_t> seed;
    std::optional<CavityModeSet> modes;
    std::optional<EnsembleSpec> ensemble;
    std::optional<VibrationalBath> bath;
    AssemblyOptions assembly;
    std::optional<DriveConfig> drive;
    std::optional<EvolveConfig> evolve;
    std::optional<EquilibriumConfig> equilibrium;
    std::optional<ScanConfig> threshold_scan;
    std::optional<OracleConfig> oracle;
    std::string format = "csv";
};

struct ParseResult {
    std::optional<ScenarioConfig> config;
    std::vector<ConfigIssue> issues;

    bool ok() const { return config.has_value() && issues.empty(); }
};

namespace detail {

inline void line_column(const std::string &text, std::size_t byte, int &line, int &column) {
    line = 1;
    column = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
}

class Reader {
  public:
    explicit Reader(std::vector<ConfigIssue> &issues) : m_issues(issues) {}

    void schema(const std::string &path, const std::string &msg) {
        m_issues.push_back({ConfigIssue::Kind::Schema, path, msg, 0, 0});
    }
    void physics(const std::string &path, const std::string &msg) {
        m_issues.push_back({ConfigIssue::Kind::Physics, path, msg, 0, 0});
    }

    static std::string join(const std::string &path, const std::string &key) {
        return path.empty() ? key : path + "." + key;
    }

    bool object(const json &j, const std::string &path) {
        if (!j.is_object()) {
            schema(path, "expected an object");
            return false;
        }
        return true;
    }

    void allowed_keys(const json &obj, const std::string &path, const std::set<std::string> &allowed) {
        for (auto it = obj.begin(); it != obj.end(); ++it)
            if (!allowed.count(it.key())) schema(join(path, it.key()), "unknown key");
    }

    enum class Bound { Any, Positive, NonNegative };

    std::optional<double> number(const json &obj, const std::string &key, const std::string &path, bool required,
                                 Bound bound = Bound::Any) {
        const std::string p = join(path, key);
        if (!obj.contains(key) || obj.at(key).is_null()) {
            if (required) schema(p, "required number is missing");
            return std::nullopt;
        }
        const auto &v = obj.at(key);
        if (!v.is_number()) {
            schema(p, "expected a number");
            return std::nullopt;
        }
        const double x = v.get<double>();
        if (!std::isfinite(x)) {
            schema(p, "must be finite");
            return std::nullopt;
        }
        if (bound == Bound::Positive && !(x > 0.0)) {
            schema(p, "must be > 0, got " + v.dump());
            return std::nullopt;
        }
        if (bound == Bound::NonNegative && !(x >= 0.0)) {
            schema(p, "must be >= 0, got " + v.dump());
            return std::nullopt;
        }
        return x;
    }

    std::optional<std::int64_t> integer(const json &obj, const std::string &key, const std::string &path, bool required,
                                        std::int64_t min_value) {
        const std::string p = join(path, key);
        if (!obj.contains(key) || obj.at(key).is_null()) {
            if (required) schema(p, "required integer is missing");
            return std::nullopt;
        }
        const auto &v = obj.at(key);
        if (!v.is_number_integer()) {
            schema(p, "expected an integer");
            return std::nullopt;
        }
        const auto x = v.get<std::int64_t>();
        if (x < min_value) {
            schema(p, "must be >= " + std::to_string(min_value));
            return std::nullopt;
        }
        return x;
    }

    std::optional<std::string> string(const json &obj, const std::string &key, const std::string &path,
                                      const std::set<std::string> &choices) {
        const std::string p = join(path, key);
        if (!obj.contains(key)) return std::nullopt;
        const auto &v = obj.at(key);
        if (!v.is_string()) {
            schema(p, "expected a string");
            return std::nullopt;
        }
        const auto s = v.get<std::string>();
        if (!choices.empty() && !choices.count(s)) {
            std::string opts;
            for (const auto &c : choices) opts += (opts.empty() ? "" : ", ") + c;
            schema(p, "must be one of {" + opts + "}, got '" + s + "'");
            return std::nullopt;
        }
        return s;
    }

    std::optional<std::vector<double>> numbers(const json &obj, const std::string &key, const std::string &path,
                                               bool required, Bound bound = Bound::Any) {
        const std::string p = join(path, key);
        if (!obj.contains(key)) {
            if (required) schema(p, "required array is missing");
            return std::nullopt;
        }
        const auto &v = obj.at(key);
        if (!v.is_array()) {
            schema(p, "expected an array of numbers");
            return std::nullopt;
        }
        std::vector<double> out;
        bool good = true;
        for (std::size_t i = 0; i < v.size(); ++i) {
            json holder = json::object();
            holder["v"] = v[i];
            const auto x = number(holder, "v", p + "[" + std::to_string(i) + "]", true, bound);
            if (!x) good = false;
            else out.push_back(*x);
        }
        if (!good) return std::nullopt;
        return out;
    }

    std::optional<bool> boolean(const json &obj, const std::string &key, const std::string &path) {
        if (!obj.contains(key)) return std::nullopt;
        if (!obj.at(key).is_boolean()) {
            schema(join(path, key), "expected true or false");
            return std::nullopt;
        }
        return obj.at(key).get<bool>();
    }

  private:
    std::vector<ConfigIssue> &m_issues;
};

inline std::optional<Wavevector> read_wavevector(Reader &r, const json &v, const std::string &path) {
    json holder = json::object();
    holder["k"] = v;
    const auto xs = r.numbers(holder, "k", path, true);
    if (!xs) return std::nullopt;
    if (xs->size() != 2) {
        r.schema(path, "a wavevector has exactly 2 components");
        return std::nullopt;
    }
    return Wavevector{(*xs)[0], (*xs)[1]};
}

inline std::optional<CavityModeSet> read_modes(Reader &r, const json &j) {
    const std::string path = "modes";
    if (!r.object(j, path)) return std::nullopt;
    r.allowed_keys(j, path, {"dispersion", "list"});
    if (j.contains("dispersion") == j.contains("list")) {
        r.schema(path, "exactly one of 'dispersion' or 'list' is required");
        return std::nullopt;
    }
    if (j.contains("dispersion")) {
        const std::string p = "modes.dispersion";
        const auto &d = j.at("dispersion");
        if (!r.object(d, p)) return std::nullopt;
        r.allowed_keys(d, p, {"omega0", "alpha_cav", "grid", "points", "rabi", "loss"});
        const auto omega0 = r.number(d, "omega0", p, true, Reader::Bound::Positive);
        const auto alpha = r.number(d, "alpha_cav", p, true);
        const auto rabi = r.number(d, "rabi", p, false, Reader::Bound::NonNegative);
        const auto loss = r.number(d, "loss", p, false, Reader::Bound::NonNegative);
        std::vector<Wavevector> grid;
        bool grid_ok = false;
        if (d.contains("grid") == d.contains("points")) {
            r.schema(p, "exactly one of 'grid' or 'points' is required");
        } else if (d.contains("grid")) {
            const auto &g = d.at("grid");
            if (r.object(g, p + ".grid")) {
                r.allowed_keys(g, p + ".grid", {"k_min", "k_max", "n"});
                const auto kmin = r.number(g, "k_min", p + ".grid", true);
                const auto kmax = r.number(g, "k_max", p + ".grid", true);
                const auto n = r.integer(g, "n", p + ".grid", true, 1);
                if (kmin && kmax && n) {
                    if (*n > 64) r.schema(p + ".grid.n", "at most 64 points per axis");
                    else {
                        grid = square_k_grid(*kmin, *kmax, static_cast<int>(*n));
                        grid_ok = true;
                    }
                }
            }
        } else {
            const auto &pts = d.at("points");
            if (!pts.is_array() || pts.empty()) {
                r.schema(p + ".points", "expected a non-empty array of [kx, ky]");
            } else {
                grid_ok = true;
                for (std::size_t i = 0; i < pts.size(); ++i) {
                    const auto k = read_wavevector(r, pts[i], p + ".points[" + std::to_string(i) + "]");
                    if (!k) grid_ok = false;
                    else grid.push_back(*k);
                }
            }
        }
        if (!omega0 || !alpha || !grid_ok) return std::nullopt;
        try {
            return build_planar_dispersion(*omega0, *alpha, grid, rabi.value_or(0.0), loss.value_or(0.0));
        } catch (const std::exception &e) {
            r.physics(p, e.what());
            return std::nullopt;
        }
    }

    const std::string p = "modes.list";
    const auto &list = j.at("list");
    if (!list.is_array() || list.empty()) {
        r.schema(p, "expected a non-empty array of modes");
        return std::nullopt;
    }
    std::vector<CavityMode> modes;
    bool good = true;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string pi = p + "[" + std::to_string(i) + "]";
        const auto &m = list[i];
        if (!r.object(m, pi)) {
            good = false;
            continue;
        }
        r.allowed_keys(m, pi, {"id", "energy", "rabi", "loss", "wavevector"});
        const auto id = r.integer(m, "id", pi, true, 0);
        const auto energy = r.number(m, "energy", pi, true, Reader::Bound::Positive);
        const auto rabi = r.number(m, "rabi", pi, false, Reader::Bound::NonNegative);
        const auto loss = r.number(m, "loss", pi, false, Reader::Bound::NonNegative);
        std::optional<Wavevector> k;
        if (m.contains("wavevector")) {
            k = read_wavevector(r, m.at("wavevector"), pi + ".wavevector");
            if (!k) good = false;
        }
        if (!id || !energy) {
            good = false;
            continue;
        }
        modes.push_back({static_cast<int>(*id), *energy, k, rabi.value_or(0.0), loss.value_or(0.0)});
    }
    if (!good) return std::nullopt;
    try {
        return CavityModeSet(std::move(modes));
    } catch (const std::exception &e) {
        r.physics(p, e.what());
        return std::nullopt;
    }
}

inline std::optional<SpectralSpec> read_spectral(Reader &r, const json &j, const std::string &p) {
    if (!r.object(j, p)) return std::nullopt;
    r.allowed_keys(j, p, {"kind", "value", "omega", "values"});
    SpectralSpec s;
    const auto kind = r.string(j, "kind", p, {"linewidth_estimate", "constant", "table"});
    if (!j.contains("kind")) r.schema(p + ".kind", "required string is missing");
    if (!kind) return std::nullopt;
    s.kind = *kind;
    if (s.kind == "constant") {
        const auto v = r.number(j, "value", p, true, Reader::Bound::NonNegative);
        if (!v) return std::nullopt;
        s.value = *v;
    } else if (s.kind == "table") {
        const auto om = r.numbers(j, "omega", p, true, Reader::Bound::NonNegative);
        const auto vals = r.numbers(j, "values", p, true, Reader::Bound::NonNegative);
        if (!om || !vals) return std::nullopt;
        s.omega = *om;
        s.table = *vals;
    }
    return s;
}

inline std::optional<EnsembleSpec> read_ensemble(Reader &r, const json &j) {
    const std::string p = "ensemble";
    if (!r.object(j, p)) return std::nullopt;
    r.allowed_keys(j, p, {"n_mol", "concentration", "area", "molecule_size_nm", "exciton_energy", "spectral_product",
                          "disorder", "molecules"});
    EnsembleSpec e;
    bool good = true;
    if (auto n = r.integer(j, "n_mol", p, false, 1)) e.n_mol = static_cast<std::uint64_t>(*n);
    else if (j.contains("n_mol")) good = false;
    e.concentration = r.number(j, "concentration", p, false, Reader::Bound::Positive);
    e.area = r.number(j, "area", p, false, Reader::Bound::Positive);
    if ((j.contains("concentration") && !e.concentration) || (j.contains("area") && !e.area)) good = false;
    if (auto l = r.number(j, "molecule_size_nm", p, false, Reader::Bound::Positive)) e.molecule_size_nm = *l;
    else if (j.contains("molecule_size_nm")) good = false;
    e.exciton_energy = r.number(j, "exciton_energy", p, false, Reader::Bound::Positive);
    if (j.contains("exciton_energy") && !e.exciton_energy) good = false;
    if (j.contains("spectral_product")) {
        if (auto s = read_spectral(r, j.at("spectral_product"), p + ".spectral_product")) e.spectral = *s;
        else good = false;
    }
    if (j.contains("disorder")) {
        const auto &d = j.at("disorder");
        if (r.object(d, p + ".disorder")) {
            r.allowed_keys(d, p + ".disorder", {"exciton_sigma"});
            e.disorder_sigma = r.number(d, "exciton_sigma", p + ".disorder", true, Reader::Bound::NonNegative);
            if (!e.disorder_sigma) good = false;
        } else {
            good = false;
        }
    }
    if (j.contains("molecules")) {
        const auto &ms = j.at("molecules");
        if (!ms.is_array() || ms.empty()) {
            r.schema(p + ".molecules", "expected a non-empty array");
            good = false;
        } else {
            for (std::size_t i = 0; i < ms.size(); ++i) {
                const std::string pm = p + ".molecules[" + std::to_string(i) + "]";
                const auto &m = ms[i];
                if (!r.object(m, pm)) {
                    good = false;
                    continue;
                }
                r.allowed_keys(m, pm, {"exciton_energy", "couplings", "phases", "spectral_product"});
                ExplicitMolecule em;
                const auto ex = r.number(m, "exciton_energy", pm, true, Reader::Bound::Positive);
                const auto cs = r.numbers(m, "couplings", pm, true, Reader::Bound::NonNegative);
                const auto ph = r.numbers(m, "phases", pm, false);
                if (!ex || !cs || (m.contains("phases") && !ph)) {
                    good = false;
                    continue;
                }
                em.exciton_energy = *ex;
                em.couplings = *cs;
                if (ph) em.phases = *ph;
                if (m.contains("spectral_product")) {
                    em.spectral = read_spectral(r, m.at("spectral_product"), pm + ".spectral_product");
                    if (!em.spectral) good = false;
                }
                e.molecules.push_back(std::move(em));
            }
        }
    }
    if (!good) return std::nullopt;

    // Cross-field structure.
    if (e.is_explicit()) {
        if (e.exciton_energy || e.disorder_sigma)
            r.schema(p, "'molecules' cannot be combined with 'exciton_energy' or 'disorder'");
        if (e.n_mol && *e.n_mol != e.molecules.size())
            r.physics(p + ".n_mol", "n_mol = " + std::to_string(*e.n_mol) + " but " +
                                         std::to_string(e.molecules.size()) + " molecules are listed");
        e.n_mol = e.molecules.size();
    } else {
        if (!e.exciton_energy) {
            r.schema(p + ".exciton_energy", "required for a homogeneous ensemble");
            return std::nullopt;
        }
        if (!e.n_mol && !e.concentration) {
            r.schema(p + ".n_mol", "give n_mol, or concentration (with area, or scanned areas)");
            return std::nullopt;
        }
    }
    if (e.concentration && e.area) {
        const double expected = std::round(*e.concentration * *e.area);
        if (e.n_mol && static_cast<double>(*e.n_mol) != expected) {
            r.physics(p, "n_mol = " + std::to_string(*e.n_mol) + " is inconsistent with round(concentration * area) = " +
                             std::to_string(static_cast<long long>(expected)));
            return std::nullopt;
        }
        if (expected < 1.0) {
            r.physics(p, "concentration * area rounds to zero molecules");
            return std::nullopt;
        }
        e.n_mol = static_cast<std::uint64_t>(expected);
    }
    if (e.disorder_sigma && e.n_mol && *e.n_mol > 1'000'000) {
        r.physics(p + ".disorder", "disordered ensembles are sampled molecule by molecule; n_mol must be <= 1e6");
        return std::nullopt;
    }
    return e;
}

inline std::optional<VibrationalBath> read_bath(Reader &r, const json &j) {
    const std::string p = "bath";
    if (!r.object(j, p)) return std::nullopt;
    r.allowed_keys(j, p, {"temperature", "mlfv_cutoff", "a2", "gamma0", "slope_c"});
    VibrationalBath b;
    const auto t = r.number(j, "temperature", p, true, Reader::Bound::Positive);
    const auto w = r.number(j, "mlfv_cutoff", p, false, Reader::Bound::Positive);
    const auto a2 = r.number(j, "a2", p, true, Reader::Bound::NonNegative);
    const auto g0 = r.number(j, "gamma0", p, false, Reader::Bound::NonNegative);
    const auto c = r.number(j, "slope_c", p, false, Reader::Bound::NonNegative);
    auto failed = [&](const char *k, bool parsed) { return j.contains(k) && !j.at(k).is_null() && !parsed; };
    if (!t || !a2 || failed("mlfv_cutoff", w.has_value()) || failed("gamma0", g0.has_value()) ||
        failed("slope_c", c.has_value()))
        return std::nullopt;
    b.temperature = *t;
    if (w) b.mlfv_cutoff = *w;
    b.a2 = *a2;
    if (g0) b.gamma0 = *g0;
    b.slope_c = c;
    return b;
}

inline bool read_rates(Reader &r, const json &j, AssemblyOptions &out) {
    const std::string p = "rates";
    if (!r.object(j, p)) return false;
    r.allowed_keys(j, p, {"policy", "degenerate", "k_bound"});
    bool good = true;
    if (auto s = r.string(j, "policy", p, {"estimate", "microscopic"}))
        out.source = *s == "microscopic" ? RateSource::Microscopic : RateSource::Estimate;
    else if (j.contains("policy")) good = false;
    if (j.contains("degenerate")) {
        const auto &d = j.at("degenerate");
        const std::string pd = p + ".degenerate";
        if (r.object(d, pd)) {
            r.allowed_keys(d, pd, {"mode", "epsilon"});
            if (auto m = r.string(d, "mode", pd, {"zero", "floor", "floor_kms"})) {
                out.regularization.mode = *m == "zero" ? DegenerateMode::Zero
                                          : *m == "floor" ? DegenerateMode::Floor
                                                          : DegenerateMode::FloorKeepKms;
            } else if (d.contains("mode")) {
                good = false;
            }
            out.regularization.epsilon = r.number(d, "epsilon", pd, false, Reader::Bound::Positive);
            if (d.contains("epsilon") && !out.regularization.epsilon) good = false;
        } else {
            good = false;
        }
    }
    out.k_bound = r.number(j, "k_bound", p, false, Reader::Bound::Positive);
    if (j.contains("k_bound") && !out.k_bound) good = false;
    return good;
}

inline std::optional<DriveConfig> read_drive(Reader &r, const json &j, std::size_t n_modes) {
    const std::string p = "drive";
    if (!r.object(j, p)) return std::nullopt;
    r.allowed_keys(j, p, {"pump", "loss"});
    DriveConfig d;
    if (auto l = r.boolean(j, "loss", p)) d.loss = *l;
    else if (j.contains("loss")) return std::nullopt;
    if (j.contains("pump")) {
        const auto &pump = j.at("pump");
        if (pump.is_array()) {
            auto v = r.numbers(j, "pump", p, true, Reader::Bound::NonNegative);
            if (!v) return std::nullopt;
            if (n_modes != 0 && v->size() != n_modes) {
                r.schema(p + ".pump", "expected " + std::to_string(n_modes) + " entries (one per mode, energy order)");
                return std::nullopt;
            }
            d.pump = *v;
        } else if (pump.is_object()) {
            r.allowed_keys(pump, p + ".pump", {"top_modes", "rate"});
            const auto k = r.integer(pump, "top_modes", p + ".pump", true, 1);
            const auto rate = r.number(pump, "rate", p + ".pump", true, Reader::Bound::NonNegative);
            if (!k || !rate) return std::nullopt;
            d.top_modes = static_cast<std::size_t>(*k);
            d.top_rate = *rate;
        } else {
            r.schema(p + ".pump", "expected an array or {top_modes, rate}");
            return std::nullopt;
        }
    }
    return d;
}

inline std::optional<InitialSpec> read_initial(Reader &r, const json &j, const std::string &p) {
    if (!r.object(j, p)) return std::nullopt;
    r.allowed_keys(j, p, {"kind", "values", "mode_id", "n_total"});
    InitialSpec s;
    const auto kind = r.string(j, "kind", p, {"occupations", "single_mode", "uniform", "random", "bose_einstein"});
    if (!kind) {
        if (!j.contains("kind")) r.schema(p + ".kind", "required string is missing");
        return std::nullopt;
    }
    s.kind = *kind;
    if (s.kind == "occupations") {
        auto v = r.numbers(j, "values", p, true, Reader::Bound::NonNegative);
        if (!v) return std::nullopt;
        s.values = *v;
    } else {
        const auto n = r.number(j, "n_total", p, true, Reader::Bound::Positive);
        if (!n) return std::nullopt;
        s.n_total = *n;
        if (s.kind == "single_mode") {
            const auto id = r.integer(j, "mode_id", p, false, 0);
            if (j.contains("mode_id") && !id) return std::nullopt;
            if (id) s.mode_id = static_cast<int>(*id);
        }
    }
    return s;
}

inline std::optional<EvolveConfig> read_evolve(Reader &r, const json &j) {
    const std::string p = "evolve";
    if (!r.object(j, p)) return std::nullopt;
    r.allowed_keys(j, p, {"t_final", "sample_every", "rel_tol", "abs_tol", "initial"});
    EvolveConfig e;
    const auto t = r.number(j, "t_final", p, true, Reader::Bound::Positive);
    e.sample_every = r.number(j, "sample_every", p, false, Reader::Bound::Positive);
    const auto rt = r.number(j, "rel_tol", p, false, Reader::Bound::Positive);
    const auto at = r.number(j, "abs_tol", p, false, Reader::Bound::Positive);
    bool good = t && !(j.contains("sample_every") && !e.sample_every) && !(j.contains("rel_tol") && !rt) &&
                !(j.contains("abs_tol") && !at);
    if (j.contains("initial")) {
        if (auto s = read_initial(r, j.at("initial"), p + ".initial")) e.initial = *s;
        else good = false;
    }
    if (!good) return std::nullopt;
    e.t_final = *t;
    if (rt) e.rel_tol = *rt;
    if (at) e.abs_tol = *at;
    return e;
}

inline std::optional<ScanConfig> read_scan(Reader &r, const json &j) {
    const std::string p = "threshold_scan";
    if (!r.object(j, p)) return std::nullopt;
    r.allowed_keys(j, p, {"areas", "pumped_modes", "fraction", "pump_min", "pump_max"});
    ScanConfig s;
    const auto areas = r.numbers(j, "areas", p, true, Reader::Bound::Positive);
    const auto k = r.integer(j, "pumped_modes", p, false, 1);
    const auto f = r.number(j, "fraction", p, false, Reader::Bound::Positive);
    const auto pmin = r.number(j, "pump_min", p, false, Reader::Bound::Positive);
    const auto pmax = r.number(j, "pump_max", p, false, Reader::Bound::Positive);
    if (!areas || (j.contains("pumped_modes") && !k) || (j.contains("fraction") && !f) ||
        (j.contains("pump_min") && !pmin) || (j.contains("pump_max") && !pmax))
        return std::nullopt;
    if (areas->empty()) {
        r.schema(p + ".areas", "at least one area is required");
        return std::nullopt;
    }
    if (f && *f > 1.0) {
        r.schema(p + ".fraction", "must be <= 1");
        return std::nullopt;
    }
    s.areas = *areas;
    if (k) s.pumped_modes = static_cast<std::size_t>(*k);
    if (f) s.fraction = *f;
    if (pmin) s.pump_min = *pmin;
    if (pmax) s.pump_max = *pmax;
    if (!(s.pump_min < s.pump_max)) {
        r.schema(p, "pump_min must be below pump_max");
        return std::nullopt;
    }
    return s;
}

inline std::optional<OracleConfig> read_oracle(Reader &r, const json &j) {
    const std::string p = "oracle";
    if (!r.object(j, p)) return std::nullopt;
    r.allowed_keys(j, p, {"mode_ids", "cutoff", "t_final", "samples", "initial"});
    OracleConfig o;
    bool good = true;
    if (!j.contains("mode_ids") || !j.at("mode_ids").is_array()) {
        r.schema(p + ".mode_ids", "required array of 1 to 3 mode ids");
        good = false;
    } else {
        for (const auto &v : j.at("mode_ids")) {
            if (!v.is_number_integer()) {
                r.schema(p + ".mode_ids", "mode ids must be integers");
                good = false;
                break;
            }
            o.mode_ids.push_back(v.get<int>());
        }
        if (good && (o.mode_ids.empty() || o.mode_ids.size() > 3)) {
            r.schema(p + ".mode_ids", "between 1 and 3 modes are supported");
            good = false;
        }
    }
    if (auto c = r.integer(j, "cutoff", p, false, 1)) o.cutoff = static_cast<int>(*c);
    else if (j.contains("cutoff")) good = false;
    if (auto t = r.number(j, "t_final", p, false, Reader::Bound::Positive)) o.t_final = *t;
    else if (j.contains("t_final")) good = false;
    if (auto s = r.integer(j, "samples", p, false, 2)) o.samples = static_cast<int>(*s);
    else if (j.contains("samples")) good = false;
    if (j.contains("initial")) {
        const auto &ini = j.at("initial");
        const std::string pi = p + ".initial";
        if (r.object(ini, pi)) {
            r.allowed_keys(ini, pi, {"kind", "values"});
            if (auto k = r.string(ini, "kind", pi, {"fock", "thermal", "shared_photon"})) o.initial_kind = *k;
            else good = false;
            if (ini.contains("values")) {
                if (auto v = r.numbers(ini, "values", pi, true, Reader::Bound::NonNegative)) o.initial_values = *v;
                else good = false;
            }
        } else {
            good = false;
        }
    }
    if (!good) return std::nullopt;
    if (!o.initial_values.empty() && o.initial_values.size() != o.mode_ids.size()) {
        r.schema(p + ".initial.values", "one value per oracle mode is required");
        return std::nullopt;
    }
    return o;
}

} // namespace detail

/// Parses and validates a scenario document (JSON; // and /* */ comments
/// allowed). Every problem found is reported, not only the first.
inline ParseResult parse_config(const std::string &text) {
    ParseResult result;
    json root;
    try {
        root = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error &e) {
        ConfigIssue issue{ConfigIssue::Kind::Syntax, "", e.what(), 0, 0};
        detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0, issue.line, issue.column);
        result.issues.push_back(issue);
        return result;
    }

    detail::Reader r(result.issues);
    if (!r.object(root, "")) return result;
    r.allowed_keys(root, "", {"seed", "modes", "ensemble", "bath", "rates", "drive", "evolve", "equilibrium",
                              "threshold_scan", "oracle", "output"});

    ScenarioConfig cfg;
    cfg.source_text = text;
    if (root.contains("seed")) {
        if (!root.at("seed").is_number_unsigned()) r.schema("seed", "expected a non-negative integer");
        else cfg.seed = root.at("seed").get<std::uint64_t>();
    }
    if (root.contains("modes")) cfg.modes = detail::read_modes(r, root.at("modes"));
    if (root.contains("ensemble")) cfg.ensemble = detail::read_ensemble(r, root.at("ensemble"));
    if (root.contains("bath")) {
        cfg.bath = detail::read_bath(r, root.at("bath"));
        if (cfg.bath) {
            try {
                cfg.bath->validate();
            } catch (const std::exception &e) {
                r.physics("bath", e.what());
            }
        }
    }
    if (root.contains("rates")) detail::read_rates(r, root.at("rates"), cfg.assembly);
    if (root.contains("drive")) cfg.drive = detail::read_drive(r, root.at("drive"), cfg.modes ? cfg.modes->size() : 0);
    if (root.contains("evolve")) cfg.evolve = detail::read_evolve(r, root.at("evolve"));
    if (root.contains("equilibrium")) {
        const auto &eq = root.at("equilibrium");
        if (r.object(eq, "equilibrium")) {
            r.allowed_keys(eq, "equilibrium", {"n_total"});
            if (auto n = r.number(eq, "n_total", "equilibrium", true, detail::Reader::Bound::Positive))
                cfg.equilibrium = EquilibriumConfig{*n};
        }
    }
    if (root.contains("threshold_scan")) cfg.threshold_scan = detail::read_scan(r, root.at("threshold_scan"));
    if (root.contains("oracle")) cfg.oracle = detail::read_oracle(r, root.at("oracle"));
    if (root.contains("output")) {
        const auto &o = root.at("output");
        if (r.object(o, "output")) {
            r.allowed_keys(o, "output", {"format"});
            if (auto f = r.string(o, "format", "output", {"csv", "json"})) cfg.format = *f;
        }
    }

    // Cross-section physics checks.
    if (cfg.modes && cfg.ensemble && cfg.ensemble->is_explicit()) {
        const auto need = static_cast<std::size_t>(cfg.modes->max_id()) + 1;
        for (std::size_t i = 0; i < cfg.ensemble->molecules.size(); ++i)
            if (cfg.ensemble->molecules[i].couplings.size() < need)
                r.physics("ensemble.molecules[" + std::to_string(i) + "].couplings",
                          "needs one coupling per mode id (" + std::to_string(need) + ")");
    }
    if (cfg.modes && cfg.ensemble && cfg.ensemble->exciton_energy &&
        !(*cfg.ensemble->exciton_energy > cfg.modes->max_energy())) {
        r.physics("ensemble.exciton_energy", "must exceed the highest mode energy (red-detuned cavity)");
    }
    if (cfg.modes && cfg.oracle) {
        for (int id : cfg.oracle->mode_ids) {
            bool found = false;
            for (const auto &m : *cfg.modes) found = found || m.id == id;
            if (!found) r.physics("oracle.mode_ids", "no mode with id " + std::to_string(id));
        }
    }
    if (cfg.modes && cfg.evolve && cfg.evolve->initial.kind == "occupations" &&
        cfg.evolve->initial.values.size() != cfg.modes->size())
        r.schema("evolve.initial.values", "expected " + std::to_string(cfg.modes->size()) + " occupations");

    if (result.issues.empty()) result.config = std::move(cfg);
    return result;
}

inline ScenarioConfig parse_config_or_throw(const std::string &text) {
    auto r = parse_config(text);
    if (!r.ok()) throw ConfigError(std::move(r.issues));
    return std::move(*r.config);
}

/// Builds the molecular ensemble. n_mol / area override the configured values
/// (threshold scans); disorder sampling uses the given seed.
inline MolecularEnsemble build_ensemble(const ScenarioConfig &cfg, std::optional<std::uint64_t> n_mol_override = {},
                                        std::optional<double> area_override = {},
                                        std::optional<std::uint64_t> seed = {}) {
    if (!cfg.modes || !cfg.ensemble || !cfg.bath) throw ConfigurationError("build_ensemble: modes, ensemble and bath are required");
    const auto &spec = *cfg.ensemble;
    const auto &modes = *cfg.modes;
    const auto &bath = *cfg.bath;
    MolecularEnsemble::Geometry geo{spec.molecule_size_nm, spec.concentration, area_override ? area_override : spec.area};
    if (n_mol_override && !area_override) geo.area.reset();

    if (spec.is_explicit()) {
        if (n_mol_override) throw ConfigurationError("explicit molecule lists cannot be rescaled");
        std::vector<Molecule> mols;
        for (const auto &em : spec.molecules) {
            Molecule m;
            m.exciton_energy = em.exciton_energy;
            m.couplings = em.couplings;
            m.phases = em.phases.empty() ? std::vector<double>(em.couplings.size(), 0.0) : em.phases;
            m.spectral = (em.spectral ? *em.spectral : spec.spectral).build(bath);
            mols.push_back(std::move(m));
        }
        return MolecularEnsemble::heterogeneous(std::move(mols), geo);
    }

    if (!n_mol_override && !spec.n_mol)
        throw ConfigurationError("ensemble: n_mol is unresolved; give n_mol or concentration and area");
    const std::uint64_t n = n_mol_override ? *n_mol_override : *spec.n_mol;
    const SpectralProduct spectral = spec.spectral.build(bath);
    if (!spec.disorder_sigma || *spec.disorder_sigma == 0.0)
        return MolecularEnsemble::from_rabi(modes, n, *spec.exciton_energy, spectral, geo);

    if (!seed) throw ConfigurationError("disorder sampling requires a seed (config key 'seed' or --seed)");
    std::mt19937_64 rng(*seed);
    std::normal_distribution<double> exciton(*spec.exciton_energy, *spec.disorder_sigma);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    std::vector<Molecule> mols;
    mols.reserve(n);
    const auto width = static_cast<std::size_t>(modes.max_id()) + 1;
    for (std::uint64_t i = 0; i < n; ++i) {
        Molecule m;
        m.exciton_energy = exciton(rng);
        m.couplings.assign(width, 0.0);
        m.phases.assign(width, 0.0);
        for (const auto &mode : modes) {
            m.couplings[static_cast<std::size_t>(mode.id)] = mode.rabi * scale;
            m.phases[static_cast<std::size_t>(mode.id)] = phase(rng);
        }
        m.spectral = spectral;
        mols.push_back(std::move(m));
    }
    return MolecularEnsemble::heterogeneous(std::move(mols), geo);
}

} // namespace photherm::config

#endif // PHOTHERM_CONFIG_HPP
