#ifndef PHOTHERM_IO_HPP
#define PHOTHERM_IO_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "equilibrium.hpp"
#include "errors.hpp"
#include "kinetics.hpp"
#include "lindblad.hpp"
#include "rates.hpp"
#include "threshold.hpp"

namespace photherm::io {

using json = nlohmann::json;

/// 17 significant digits; enough for an exact double round trip.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// FNV-1a, 64 bit, as 16 hex digits.
inline std::string fnv1a_hex(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline std::vector<std::string> split_line(const std::string &line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

/// Numeric CSV with a mandatory header row.
inline CsvTable parse_csv(const std::string &text) {
    CsvTable table;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("parse_csv: missing header row");
    table.header = split_line(line);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != table.header.size())
            throw ValidationError("parse_csv: line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                                  " cells, header has " + std::to_string(table.header.size()));
        std::vector<double> row;
        for (const auto &c : cells) {
            char *end = nullptr;
            const double v = std::strtod(c.c_str(), &end);
            if (end == c.c_str() || *end != '\0')
                throw ValidationError("parse_csv: line " + std::to_string(line_no) + ": not a number: '" + c + "'");
            row.push_back(v);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

inline json optional_json(const std::optional<double> &v) { return v ? json(*v) : json(nullptr); }

// ---------------------------------------------------------- model types

inline json wavevector_json(const Wavevector &k) { return json::array({k[0], k[1]}); }

inline json cavity_modes_json(const CavityModeSet &modes) {
    json list = json::array();
    for (const auto &m : modes) {
        json j = {{"id", m.id}, {"energy", m.energy}, {"rabi", m.rabi}, {"loss", m.loss}};
        if (m.wavevector) j["wavevector"] = wavevector_json(*m.wavevector);
        list.push_back(j);
    }
    json out = {{"modes", list}};
    if (const auto &meta = modes.dispersion_meta()) {
        json grid = json::array();
        for (const auto &k : meta->grid) grid.push_back(wavevector_json(k));
        out["dispersion"] = {{"omega0", meta->omega0}, {"alpha_cav", meta->alpha_cav}, {"grid", grid}};
    }
    return out;
}

inline CavityModeSet cavity_modes_from_json(const json &j) {
    std::vector<CavityMode> modes;
    for (const auto &m : j.at("modes")) {
        CavityMode c{m.at("id").get<int>(), m.at("energy").get<double>(), std::nullopt, m.at("rabi").get<double>(),
                     m.at("loss").get<double>()};
        if (m.contains("wavevector")) c.wavevector = m.at("wavevector").get<Wavevector>();
        modes.push_back(c);
    }
    std::optional<DispersionMeta> meta;
    if (j.contains("dispersion")) {
        const auto &d = j.at("dispersion");
        meta = DispersionMeta{d.at("omega0").get<double>(), d.at("alpha_cav").get<double>(),
                              d.at("grid").get<std::vector<Wavevector>>()};
    }
    return CavityModeSet(std::move(modes), std::move(meta));
}

inline json spectral_json(const SpectralProduct &s) {
    switch (s.kind()) {
    case SpectralProduct::Kind::Constant:
        return {{"kind", "constant"}, {"value", s.value()}, {"cutoff", s.cutoff()}};
    case SpectralProduct::Kind::LinewidthEstimate:
        return {{"kind", "linewidth_estimate"}, {"a2_over_mlfv", s.value()}, {"cutoff", s.cutoff()}};
    case SpectralProduct::Kind::Tabulated:
        break;
    }
    return {{"kind", "table"}, {"omega", s.table_omega()}, {"values", s.table_value()}, {"cutoff", s.cutoff()}};
}

inline SpectralProduct spectral_from_json(const json &j) {
    const auto kind = j.at("kind").get<std::string>();
    const double cutoff = j.at("cutoff").get<double>();
    if (kind == "constant") return SpectralProduct::constant(j.at("value").get<double>(), cutoff);
    if (kind == "linewidth_estimate")
        return SpectralProduct::linewidth_estimate_from_ratio(j.at("a2_over_mlfv").get<double>(), cutoff);
    if (kind == "table")
        return SpectralProduct::tabulated(j.at("omega").get<std::vector<double>>(),
                                          j.at("values").get<std::vector<double>>(), cutoff);
    throw ValidationError("unknown spectral product kind '" + kind + "'");
}

inline json molecule_json(const Molecule &m) {
    return {{"exciton_energy", m.exciton_energy},
            {"couplings", m.couplings},
            {"phases", m.phases},
            {"spectral_product", spectral_json(m.spectral)}};
}

inline Molecule molecule_from_json(const json &j) {
    Molecule m;
    m.exciton_energy = j.at("exciton_energy").get<double>();
    m.couplings = j.at("couplings").get<std::vector<double>>();
    m.phases = j.at("phases").get<std::vector<double>>();
    m.spectral = spectral_from_json(j.at("spectral_product"));
    m.validate();
    return m;
}

inline json ensemble_json(const MolecularEnsemble &e) {
    json mols = json::array();
    for (const auto &m : e.molecules()) mols.push_back(molecule_json(m));
    const auto &g = e.geometry();
    return {{"homogeneous", e.is_homogeneous()},
            {"n_mol", e.n_mol()},
            {"molecule_size_nm", g.molecule_size_nm},
            {"concentration", optional_json(g.concentration)},
            {"area", optional_json(g.area)},
            {"molecules", mols}};
}

inline std::optional<double> optional_from_json(const json &j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

inline MolecularEnsemble ensemble_from_json(const json &j) {
    MolecularEnsemble::Geometry g{j.at("molecule_size_nm").get<double>(), optional_from_json(j.at("concentration")),
                                  optional_from_json(j.at("area"))};
    std::vector<Molecule> mols;
    for (const auto &m : j.at("molecules")) mols.push_back(molecule_from_json(m));
    if (j.at("homogeneous").get<bool>()) {
        if (mols.size() != 1) throw ValidationError("homogeneous ensemble must list exactly one molecule");
        return MolecularEnsemble::homogeneous(std::move(mols.front()), j.at("n_mol").get<std::uint64_t>(), g);
    }
    return MolecularEnsemble::heterogeneous(std::move(mols), g);
}

inline json bath_json(const VibrationalBath &b) {
    return {{"temperature", b.temperature}, {"mlfv_cutoff", b.mlfv_cutoff}, {"a2", b.a2},
            {"gamma0", b.gamma0},           {"slope_c", optional_json(b.slope_c)}};
}

inline VibrationalBath bath_from_json(const json &j) {
    VibrationalBath b{j.at("temperature").get<double>(), j.at("mlfv_cutoff").get<double>(), j.at("a2").get<double>(),
                      j.at("gamma0").get<double>(), optional_from_json(j.at("slope_c"))};
    b.validate();
    return b;
}

// ---------------------------------------------------------------- rates

/// Header "mode_id,<id>...", then one row per alpha: "<id>,gamma(alpha, beta)...".
inline std::string rate_matrix_csv(const RateMatrix &rm) {
    std::string out = "mode_id";
    for (int id : rm.mode_ids()) out += "," + std::to_string(id);
    out += "\n";
    for (std::size_t a = 0; a < rm.size(); ++a) {
        out += std::to_string(rm.mode_ids()[a]);
        for (std::size_t b = 0; b < rm.size(); ++b) out += "," + format_double(rm(a, b));
        out += "\n";
    }
    return out;
}

struct ParsedRateCsv {
    std::vector<int> mode_ids;
    Eigen::MatrixXd gamma;
};

inline ParsedRateCsv parse_rate_matrix_csv(const std::string &text) {
    const auto table = parse_csv(text);
    if (table.header.empty() || table.header.front() != "mode_id")
        throw ValidationError("parse_rate_matrix_csv: header must start with mode_id");
    ParsedRateCsv out;
    for (std::size_t i = 1; i < table.header.size(); ++i) out.mode_ids.push_back(std::stoi(table.header[i]));
    const auto n = static_cast<Eigen::Index>(out.mode_ids.size());
    if (static_cast<Eigen::Index>(table.rows.size()) != n) throw ValidationError("parse_rate_matrix_csv: matrix is not square");
    out.gamma.resize(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        const auto &row = table.rows[static_cast<std::size_t>(a)];
        if (static_cast<int>(row[0]) != out.mode_ids[static_cast<std::size_t>(a)])
            throw ValidationError("parse_rate_matrix_csv: row ids must follow header order");
        for (Eigen::Index b = 0; b < n; ++b) out.gamma(a, b) = row[static_cast<std::size_t>(b) + 1];
    }
    return out;
}

inline json rate_matrix_json(const RateMatrix &rm) {
    json j;
    j["source"] = to_string(rm.source());
    j["temperature_K"] = rm.temperature();
    j["mode_ids"] = rm.mode_ids();
    j["energies_meV"] = rm.energies();
    json rows = json::array();
    for (std::size_t a = 0; a < rm.size(); ++a) {
        json row = json::array();
        for (std::size_t b = 0; b < rm.size(); ++b) row.push_back(rm(a, b));
        rows.push_back(row);
    }
    j["gamma_meV"] = rows;
    j["regularization"] = {{"mode", to_string(rm.regularization().mode)}, {"epsilon_meV", rm.degenerate_epsilon()}};
    json record = json::array();
    for (const auto &c : rm.cutoff_record())
        record.push_back({{"lower_id", c.lower_id}, {"upper_id", c.upper_id}, {"reason", to_string(c.reason)},
                          {"delta_meV", c.delta_energy}});
    j["cutoff_record"] = record;
    return j;
}

inline CutoffReason cutoff_reason_from_string(const std::string &s) {
    for (auto r : {CutoffReason::EnergyCutoff, CutoffReason::WavevectorCutoff, CutoffReason::DegenerateZero,
                   CutoffReason::DegenerateFloor})
        if (s == to_string(r)) return r;
    throw ValidationError("unknown cutoff reason '" + s + "'");
}

inline DegenerateMode degenerate_mode_from_string(const std::string &s) {
    for (auto m : {DegenerateMode::Zero, DegenerateMode::Floor, DegenerateMode::FloorKeepKms})
        if (s == to_string(m)) return m;
    throw ValidationError("unknown degenerate mode '" + s + "'");
}

inline RateMatrix rate_matrix_from_json(const json &j) {
    const auto ids = j.at("mode_ids").get<std::vector<int>>();
    const auto energies = j.at("energies_meV").get<std::vector<double>>();
    const auto n = static_cast<Eigen::Index>(ids.size());
    Eigen::MatrixXd g(n, n);
    const auto &rows = j.at("gamma_meV");
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b) g(a, b) = rows.at(static_cast<std::size_t>(a)).at(static_cast<std::size_t>(b)).get<double>();
    std::vector<CutoffEntry> record;
    for (const auto &c : j.at("cutoff_record"))
        record.push_back({c.at("lower_id").get<int>(), c.at("upper_id").get<int>(),
                          cutoff_reason_from_string(c.at("reason").get<std::string>()), c.at("delta_meV").get<double>()});
    RegularizationPolicy reg;
    reg.mode = degenerate_mode_from_string(j.at("regularization").at("mode").get<std::string>());
    const double eps = j.at("regularization").at("epsilon_meV").get<double>();
    reg.epsilon = eps;
    const auto source = j.at("source").get<std::string>() == "microscopic" ? RateSource::Microscopic : RateSource::Estimate;
    return RateMatrix(std::move(g), ids, energies, j.at("temperature_K").get<double>(), source, std::move(record), reg, eps);
}

// ---------------------------------------------------------- trajectories

/// Columns time_ps, n_<id>..., N_total.
inline std::string trajectory_csv(const Trajectory &traj, const std::vector<int> &mode_ids) {
    std::string out = "time_ps";
    for (int id : mode_ids) out += ",n_" + std::to_string(id);
    out += ",N_total\n";
    for (const auto &s : traj.samples) {
        out += format_double(s.time);
        for (Eigen::Index i = 0; i < s.occupations.size(); ++i) out += "," + format_double(s.occupations(i));
        out += "," + format_double(s.total()) + "\n";
    }
    return out;
}

inline json trajectory_json(const Trajectory &traj, const std::vector<int> &mode_ids) {
    json j;
    j["mode_ids"] = mode_ids;
    json samples = json::array();
    for (const auto &s : traj.samples) {
        std::vector<double> n(s.occupations.data(), s.occupations.data() + s.occupations.size());
        samples.push_back({{"time_ps", s.time}, {"occupations", n}, {"N_total", s.total()}});
    }
    j["samples"] = samples;
    j["accepted_steps"] = traj.accepted_steps;
    j["rejected_steps"] = traj.rejected_steps;
    json clips = json::array();
    for (const auto &c : traj.clip_events) clips.push_back({{"time_ps", c.time}, {"mode", c.mode}, {"value", c.value}});
    j["clip_events"] = clips;
    return j;
}

// ----------------------------------------------------------- equilibrium

inline std::string equilibrium_csv(const EquilibriumResult &eq, const std::vector<int> &mode_ids,
                                   const std::vector<double> &energies) {
    std::string out = "mode_id,energy_meV,occupation\n";
    for (std::size_t i = 0; i < mode_ids.size(); ++i)
        out += std::to_string(mode_ids[i]) + "," + format_double(energies[i]) + "," +
               format_double(eq.occupations(static_cast<Eigen::Index>(i))) + "\n";
    return out;
}

inline json equilibrium_json(const EquilibriumResult &eq, const std::vector<int> &mode_ids,
                             const std::vector<double> &energies) {
    std::vector<double> n(eq.occupations.data(), eq.occupations.data() + eq.occupations.size());
    return {{"chemical_potential_meV", eq.chemical_potential},
            {"gap_below_ground_meV", eq.gap_below_ground},
            {"ground_fraction", eq.ground_fraction},
            {"converged", eq.converged},
            {"iterations", eq.iterations},
            {"mode_ids", mode_ids},
            {"energies_meV", energies},
            {"occupations", n}};
}

// -------------------------------------------------------- threshold scan

inline std::string threshold_scan_csv(const ThresholdScanResult &scan) {
    std::string out = "area_um2,N_mol,threshold_pump,converged\n";
    for (const auto &r : scan.rows)
        out += format_double(r.area) + "," + std::to_string(r.n_mol) + "," +
               (r.threshold_pump ? format_double(*r.threshold_pump) : std::string("nan")) + "," +
               (r.converged ? "1" : "0") + "\n";
    return out;
}

inline json threshold_scan_json(const ThresholdScanResult &scan) {
    json rows = json::array();
    for (const auto &r : scan.rows)
        rows.push_back({{"area_um2", r.area}, {"N_mol", r.n_mol}, {"threshold_pump", optional_json(r.threshold_pump)},
                        {"converged", r.converged}});
    return {{"rows", rows},
            {"exponent", optional_json(scan.fit.exponent)},
            {"prefactor", optional_json(scan.fit.prefactor)},
            {"r_squared", optional_json(scan.fit.r_squared)}};
}

// ---------------------------------------------------------------- oracle

inline json closure_report_json(const oracle::ClosureReport &report) {
    json rows = json::array();
    for (const auto &e : report.entries)
        rows.push_back({{"time_ps", e.time},
                        {"mode", e.mode},
                        {"exact", e.exact},
                        {"mean_field", e.mean_field},
                        {"absolute", e.absolute},
                        {"relative", e.relative},
                        {"truncation_defect", e.truncation_defect}});
    return rows;
}

} // namespace photherm::io

#endif // PHOTHERM_IO_HPP
