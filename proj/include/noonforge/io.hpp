#pragma once

// JSON and CSV encodings shared by the library and the command-line tool.
//
//   DeviceParams      {"tau0": f, "tau1": f, "theta1": f, "theta2": f}
//   ScatteringMatrix  [[re, im], ...] nine pairs, row-major
//   FockVector        {"n": int, "amplitudes": [{"occ": [..], "re": f, "im": f}]}
//                     entries with |amp| < 1e-14 omitted
//   HeraldReport      {"p_click", "f_noon" (or null), "n_target", "conditional", "params"}
//   sweep CSV         tau0,tau1,theta1,theta2,p_click,f_noon

#include <charconv>
#include <cmath>
#include <ostream>
#include <set>
#include <string>
#include <system_error>

#include <json.hpp>

#include "noonforge/device.hpp"
#include "noonforge/errors.hpp"
#include "noonforge/fock.hpp"
#include "noonforge/herald.hpp"
#include "noonforge/optimize.hpp"

namespace noonforge {

using json = nlohmann::ordered_json;

inline constexpr double kAmplitudeCutoff = 1e-14;

/// Locale-independent %.{precision}g.
inline std::string format_double(double x, int precision = 17) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, precision);
    if (res.ec != std::errc()) throw std::runtime_error("number formatting failed");
    return std::string(buf, res.ptr);
}

// -- DeviceParams -----------------------------------------------------------

inline json to_json(const DeviceParams& p) {
    return json{{"tau0", p.tau0()}, {"tau1", p.tau1()}, {"theta1", p.theta1()}, {"theta2", p.theta2()}};
}

/// Strict: all four keys, numbers only, nothing else.
inline DeviceParams device_params_from_json(const json& j) {
    if (!j.is_object()) throw DomainError("device parameters must be a JSON object");
    static const std::set<std::string> keys{"tau0", "tau1", "theta1", "theta2"};
    for (const auto& [k, v] : j.items()) {
        if (!keys.contains(k)) throw DomainError("unknown device parameter field '" + k + "'");
        if (!v.is_number()) throw DomainError("device parameter '" + k + "' must be a number");
    }
    for (const auto& k : keys) {
        if (!j.contains(k)) throw DomainError("missing device parameter field '" + k + "'");
    }
    return {j["tau0"].get<double>(), j["tau1"].get<double>(), j["theta1"].get<double>(),
            j["theta2"].get<double>()};
}

// -- ScatteringMatrix -------------------------------------------------------

inline json to_json(const ScatteringMatrix& s) {
    json arr = json::array();
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) arr.push_back(json::array({s(r, c).real(), s(r, c).imag()}));
    }
    return arr;
}

inline Eigen::Matrix3cd smatrix_from_json(const json& j) {
    if (!j.is_array() || j.size() != 9) throw DomainError("S-matrix must be nine [re, im] pairs");
    Eigen::Matrix3cd m;
    for (std::size_t k = 0; k < 9; ++k) {
        const auto& e = j[k];
        if (!e.is_array() || e.size() != 2) throw DomainError("S-matrix entries must be [re, im]");
        m(static_cast<Eigen::Index>(k / 3), static_cast<Eigen::Index>(k % 3)) =
            Complex(e[0].get<double>(), e[1].get<double>());
    }
    return m;
}

// -- FockVector -------------------------------------------------------------

inline json to_json(const FockVector& v) {
    json amps = json::array();
    const auto basis = v.basis();
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const Complex a = v.amplitudes()(static_cast<Eigen::Index>(i));
        if (std::abs(a) < kAmplitudeCutoff) continue;
        amps.push_back(json{{"occ", basis[i].occupations()}, {"re", a.real()}, {"im", a.imag()}});
    }
    return json{{"n", v.photons()}, {"amplitudes", std::move(amps)}};
}

/// Mode count comes from the first entry's "occ" or, for an empty list, `modes`.
inline FockVector fock_vector_from_json(const json& j, int modes) {
    const int n = j.at("n").get<int>();
    const auto& amps = j.at("amplitudes");
    if (!amps.empty()) modes = static_cast<int>(amps.front().at("occ").size());
    Eigen::VectorXcd v =
        Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(detail::sector_size(n, modes)));
    for (const auto& e : amps) {
        const FockState s(e.at("occ").get<std::vector<int>>());
        if (s.modes() != modes || s.total() != n) throw DomainError("amplitude outside the sector");
        v(static_cast<Eigen::Index>(basis_index(s))) =
            Complex(e.at("re").get<double>(), e.at("im").get<double>());
    }
    return FockVector(n, modes, std::move(v));
}

// -- HeraldReport -----------------------------------------------------------

inline json to_json(const HeraldReport& r) {
    return json{{"p_click", r.p_click},
                {"f_noon", r.f_noon ? json(*r.f_noon) : json(nullptr)},
                {"n_target", r.n_target},
                {"conditional", to_json(r.conditional)},
                {"params", to_json(r.params)}};
}

// -- optimization -----------------------------------------------------------

inline json to_json(const OptimizationResult& r) {
    return json{{"status", to_string(r.status)},
                {"mode", to_string(r.mode)},
                {"best", to_json(r.best)},
                {"report", to_json(r.report)},
                {"trace",
                 {{"evaluations", r.trace.evaluations},
                  {"restarts", r.trace.restarts},
                  {"grid_points", r.trace.grid_points},
                  {"best_restart", r.trace.best_restart},
                  {"final_simplex_size", r.trace.final_simplex_size}}}};
}

inline json to_json(const ManifoldSample& m) {
    json pts = json::array();
    for (std::size_t i = 0; i < m.points.size(); ++i) {
        json p = to_json(m.points[i]);
        p["p_click"] = m.reports[i].p_click;
        p["f_noon"] = m.reports[i].f_noon ? json(*m.reports[i].f_noon) : json(nullptr);
        pts.push_back(std::move(p));
    }
    return json{{"status", m.status == ManifoldStatus::Ok ? "ok" : "warning"},
                {"message", m.message},
                {"dimension", m.dimension},
                {"tangent_rank", m.tangent_rank},
                {"distances",
                 {{"min", m.points.size() > 1 ? json(m.min_distance) : json(nullptr)},
                  {"mean", m.points.size() > 1 ? json(m.mean_distance) : json(nullptr)},
                  {"max", m.points.size() > 1 ? json(m.max_distance) : json(nullptr)}}},
                {"points", std::move(pts)}};
}

// -- sweep CSV --------------------------------------------------------------

inline constexpr const char* kSweepCsvHeader = "tau0,tau1,theta1,theta2,p_click,f_noon";

/// Degenerate points leave p_click and f_noon empty; a silent herald leaves f_noon empty.
inline void write_sweep_csv_row(std::ostream& os, const SweepRow& row, int precision = 17) {
    const auto& p = row.params;
    os << format_double(p.tau0(), precision) << ',' << format_double(p.tau1(), precision) << ','
       << format_double(p.theta1(), precision) << ',' << format_double(p.theta2(), precision)
       << ',';
    if (row.report) {
        os << format_double(row.report->p_click, precision) << ',';
        if (row.report->f_noon) os << format_double(*row.report->f_noon, precision);
    } else {
        os << ',';
    }
    os << '\n';
}

}  // namespace noonforge
