#pragma once

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "harvest/game.hpp"
#include "harvest/kernel.hpp"
#include "harvest/model.hpp"
#include "harvest/optimizer.hpp"

namespace harvest::io {

using nlohmann::json;

// ---------------------------------------------------------------- scenarios

inline SampledField field_from_json(const json& j, const char* name, double T,
                                    double R) {
    if (j.is_number()) return SampledField::constant(j.get<double>(), T, R);
    if (j.is_array() && !j.empty() && j.front().is_array()) {
        const int rows = static_cast<int>(j.size());
        const int cols = static_cast<int>(j.front().size());
        std::vector<double> v;
        v.reserve(static_cast<std::size_t>(rows) * cols);
        for (const auto& row : j) {
            if (static_cast<int>(row.size()) != cols)
                throw InputError(std::string("scenario field '") + name +
                                 "': ragged 2D array");
            for (const auto& e : row) v.push_back(e.get<double>());
        }
        return SampledField(rows - 1, cols, T, R, std::move(v));
    }
    throw InputError(std::string("scenario field '") + name +
                     "' must be a number or a 2D array");
}

inline ForbiddenMask mask_from_json(const json& j, double T, double R) {
    if (j.is_null()) return {};
    if (!j.is_array() || j.empty() || !j.front().is_array())
        throw InputError("scenario field 'forbidden_mask' must be null or a 2D array");
    const int rows = static_cast<int>(j.size());
    const int cols = static_cast<int>(j.front().size());
    std::vector<std::uint8_t> m;
    m.reserve(static_cast<std::size_t>(rows) * cols);
    for (const auto& row : j)
        for (const auto& e : row) m.push_back(e.get<int>() != 0 ? 1 : 0);
    return ForbiddenMask(rows - 1, cols, T, R, std::move(m));
}

inline CostAggregator psi_from_json(const json& j) {
    if (j.is_null()) return CostAggregator::identity();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "identity") return CostAggregator::identity();
    if (kind == "quadratic") {
        const auto& c = j.at("coeffs");
        if (!c.is_array() || c.size() != 2)
            throw InputError("scenario field 'psi.coeffs' must be [a, b]");
        return CostAggregator::quadratic(c[0].get<double>(), c[1].get<double>());
    }
    throw InputError("scenario field 'psi.kind' must be 'identity' or 'quadratic'");
}

inline ModelParams scenario_from_json(const json& j) {
    ModelParams p;
    try {
        p.R = j.at("R").get<double>();
        p.T = j.at("T").get<double>();
        p.repro_rate = field_from_json(j.at("alpha"), "alpha", p.T, p.R);
        p.carrying_cap = field_from_json(j.at("h"), "h", p.T, p.R);
        p.cost = field_from_json(j.at("cost"), "cost", p.T, p.R);
        p.budget = field_from_json(j.at("budget"), "budget", p.T, p.R);
        p.budget_floor = j.at("b0").get<double>();
        p.psi = psi_from_json(j.contains("psi") ? j.at("psi") : json(nullptr));
        const auto& f0 = j.at("phi0");
        if (f0.is_number())
            p.initial_density = Profile::constant(f0.get<double>(), p.R);
        else if (f0.is_array())
            p.initial_density = Profile(f0.get<std::vector<double>>(), p.R);
        else
            throw InputError("scenario field 'phi0' must be a number or an array");
        p.forbidden = mask_from_json(
            j.contains("forbidden_mask") ? j.at("forbidden_mask") : json(nullptr),
            p.T, p.R);
        p.constant_habitat = j.value("constant_h", p.carrying_cap.is_constant());
    } catch (const json::exception& e) {
        throw InputError(std::string("scenario: ") + e.what());
    }
    return p;
}

inline ModelParams load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open scenario file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputError("scenario parse error in " + path + ": " + e.what());
    }
    return scenario_from_json(j);
}

/// Game data: the base scenario plus an optional "players" list; each entry
/// may override psi/cost/budget/forbidden_mask, defaulting to the base's.
inline GameSpec game_from_json(const json& j, int replicate_players = 0) {
    GameSpec spec;
    spec.base = scenario_from_json(j);
    spec.delta_cap = j.value("delta_cap", 0.0);
    PlayerData base_player{spec.base.psi, spec.base.cost, spec.base.budget,
                           spec.base.forbidden};
    if (j.contains("players") && j.at("players").is_array()) {
        for (const auto& pj : j.at("players")) {
            PlayerData pl = base_player;
            if (pj.contains("psi")) pl.psi = psi_from_json(pj.at("psi"));
            if (pj.contains("cost"))
                pl.cost = field_from_json(pj.at("cost"), "players.cost",
                                          spec.base.T, spec.base.R);
            if (pj.contains("budget"))
                pl.budget = field_from_json(pj.at("budget"), "players.budget",
                                            spec.base.T, spec.base.R);
            if (pj.contains("forbidden_mask"))
                pl.forbidden =
                    mask_from_json(pj.at("forbidden_mask"), spec.base.T, spec.base.R);
            spec.players.push_back(std::move(pl));
        }
    }
    for (int i = static_cast<int>(spec.players.size()); i < replicate_players; ++i)
        spec.players.push_back(base_player);
    if (spec.players.empty()) spec.players.push_back(base_player);
    return spec;
}

// ----------------------------------------------------------------- measures

inline json measure_to_json(const TimeMeasure& mu) {
    json j;
    j["R"] = mu.R;
    j["T"] = mu.T;
    j["breakpoints"] = mu.breakpoints;
    json slices = json::array();
    for (const auto& s : mu.slices) {
        json js;
        json atoms = json::array();
        for (const auto& a : s.atoms) atoms.push_back({a.x, a.mass});
        js["atoms"] = atoms;
        js["density"] = s.density.empty() ? json(nullptr) : json(s.density);
        slices.push_back(js);
    }
    j["slices"] = slices;
    return j;
}

inline TimeMeasure measure_from_json(const json& j) {
    TimeMeasure mu;
    try {
        mu.R = j.at("R").get<double>();
        mu.T = j.at("T").get<double>();
        mu.breakpoints = j.at("breakpoints").get<std::vector<double>>();
        for (const auto& js : j.at("slices")) {
            SpatialMeasure s;
            for (const auto& a : js.at("atoms"))
                s.atoms.push_back({a[0].get<double>(), a[1].get<double>()});
            if (js.contains("density") && !js.at("density").is_null())
                s.density = js.at("density").get<std::vector<double>>();
            mu.slices.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("measure: ") + e.what());
    }
    if (mu.breakpoints.size() != mu.slices.size() + 1)
        throw InputError("measure: breakpoints/slices size mismatch");
    return mu;
}

inline TimeMeasure load_measure(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open measure file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputError("measure parse error in " + path + ": " + e.what());
    }
    return measure_from_json(j);
}

// -------------------------------------------------------------------- CSV

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// One row per time level: t, then the nx nodal values from x=0 to x=R.
inline void field_to_csv(const Field& f, std::ostream& os) {
    const Grid& g = f.grid();
    os << "t";
    for (int i = 0; i < g.nx; ++i) os << ",x" << num(g.x(i));
    os << "\n";
    for (int n = 0; n <= g.nt; ++n) {
        os << num(g.t(n));
        for (int i = 0; i < g.nx; ++i) os << "," << num(f.at(n, i));
        os << "\n";
    }
}

inline void trace_to_csv(std::span<const double> values, const char* header,
                         std::ostream& os) {
    os << "iter," << header << "\n";
    for (std::size_t k = 0; k < values.size(); ++k)
        os << k << "," << num(values[k]) << "\n";
}

inline void scan_to_csv(const SegmentScan& s, std::ostream& os) {
    os << "zeta,j,j_second\n";
    for (std::size_t k = 0; k < s.zeta.size(); ++k)
        os << num(s.zeta[k]) << "," << num(s.j[k]) << "," << num(s.j_second[k])
           << "\n";
}

// ------------------------------------------------------------------ reports

inline json field_to_json(const Field& f) {
    const Grid& g = f.grid();
    json j;
    j["grid"] = {{"nx", g.nx}, {"nt", g.nt}, {"R", g.R}, {"T", g.T}};
    json rows = json::array();
    for (int n = 0; n <= g.nt; ++n) {
        json row = json::array();
        for (int i = 0; i < g.nx; ++i) row.push_back(f.at(n, i));
        rows.push_back(row);
    }
    j["values"] = rows;
    return j;
}

inline json validation_to_json(const ValidationReport& r) {
    json arr = json::array();
    for (const auto& v : r.violations)
        arr.push_back({{"code", v.code}, {"detail", v.detail}});
    return {{"admissible", r.admissible()}, {"violations", arr}};
}

inline json estimate_to_json(const EstimateReport& r) {
    return {{"slope_sup_neumann", r.slope_sup_neumann},
            {"slope_gradl2_neumann", r.slope_gradl2_neumann},
            {"mass_error_neumann", r.mass_error_neumann},
            {"slope_sup_dirichlet", r.slope_sup_dirichlet},
            {"slope_gradl2_dirichlet", r.slope_gradl2_dirichlet},
            {"l1_max_dirichlet", r.l1_max_dirichlet},
            {"slope_tol", r.slope_tol},
            {"mass_tol", r.mass_tol},
            {"pass", r.pass}};
}

inline json payoff_to_json(const PayoffBreakdown& b) {
    json j;
    j["status"] = b.ok() ? "ok" : "infeasible";
    if (!b.ok()) j["reason"] = b.infeasible_reason;
    j["harvest"] = b.harvest;
    j["cost_inner"] = b.cost_inner;
    j["cost_value"] = b.cost_value;
    j["J"] = b.value;
    return j;
}

inline json optimization_to_json(const OptimizationReport& r) {
    json j;
    j["converged"] = r.converged;
    j["status"] = r.status;
    j["iterations"] = r.iterations;
    j["fw_gap"] = r.fw_gap;
    j["euler_residual"] = r.euler_residual_value;
    j["payoff"] = payoff_to_json(r.payoff);
    j["J_trace"] = r.J_trace;
    j["mu_opt"] = measure_to_json(r.mu_opt);
    return j;
}

inline json certificate_to_json(const CertificateReport& r) {
    json j;
    j["refused"] = r.refused;
    if (r.refused) j["refusal"] = r.refusal;
    j["zeta"] = r.zeta;
    j["keypoint"] = r.keypoint;
    j["all_negative"] = r.all_negative;
    j["state_dist_h_inf"] = r.state_dist_h_inf;
    j["state_min"] = r.state_min;
    j["half_h"] = r.half_h;
    j["grad_l2_sup"] = r.grad_l2_sup;
    return j;
}

inline json nash_to_json(const NashReport& r) {
    json j;
    j["converged"] = r.converged;
    j["rounds"] = r.rounds;
    j["residuals"] = r.residuals;
    j["payoffs"] = r.payoffs;
    j["displacement_trace"] = r.displacement_trace;
    json prof = json::array();
    for (const auto& mu : r.profile) prof.push_back(measure_to_json(mu));
    j["profile"] = prof;
    return j;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write file: " + path);
    out << text;
}

inline void write_json(const std::string& path, const json& j) {
    write_text(path, j.dump(2) + "\n");
}

}  // namespace harvest::io
