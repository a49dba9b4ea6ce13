// noonforge command-line front end.
//
//   noonforge smatrix   --tau0 T0 --tau1 T1 --theta TH | --params FILE
//   noonforge evolve    <params> --input 1,2,1
//   noonforge herald    <params> --input 1,2,1 --herald 1 [--n 3]
//   noonforge optimize  --input 1,2,1 --herald 1 [--n 3] [--mode ...] [--seed S]
//   noonforge sweep     --input 1,3,1 --herald 1 --tau0 0:1:101 ... [--pareto]
//   noonforge reproduce fig2 [--targets FILE] [--out fig2.csv]
//
// Exit codes: 0 ok, 1 reproduction tolerance failure, 2 usage or validation
// error, 3 degenerate device.

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "noonforge/noonforge.hpp"

#ifndef NOONFORGE_DEFAULT_TARGETS
#define NOONFORGE_DEFAULT_TARGETS "targets/fig2.json"
#endif

using namespace noonforge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitReproduction = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDegenerate = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// -- option groups ----------------------------------------------------------

struct OutputOptions {
    std::string format;
    std::string out;
    int precision = 17;
    unsigned threads = 0;
};

void add_output_options(CLI::App* sub, OutputOptions& o, const std::string& default_format) {
    o.format = default_format;
    sub->add_option("--format", o.format, "Output format")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
    sub->add_option("--out", o.out, "Write output to PATH instead of standard output");
    sub->add_option("--precision", o.precision, "Significant digits for numeric output")
        ->check(CLI::Range(1, 17))
        ->capture_default_str();
    sub->add_option("--threads", o.threads, "Worker threads (0 = hardware concurrency)");
}

struct ParamOptions {
    std::optional<double> tau0, tau1, theta, theta1, theta2;
    std::string params;
};

void add_param_options(CLI::App* sub, ParamOptions& p) {
    sub->add_option("--tau0", p.tau0, "Outer coupler transmission");
    sub->add_option("--tau1", p.tau1, "Central junction parameter");
    sub->add_option("--theta", p.theta, "Round-trip phase of both rings");
    sub->add_option("--theta1", p.theta1, "Round-trip phase of the a-b ring");
    sub->add_option("--theta2", p.theta2, "Round-trip phase of the b-c ring");
    sub->add_option("--params", p.params, "Device parameters as a JSON file or inline JSON object");
}

bool any_set(const ParamOptions& p) {
    return p.tau0 || p.tau1 || p.theta || p.theta1 || p.theta2 || !p.params.empty();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json_text(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw UsageError("invalid JSON in " + what + ": " + e.what());
    }
}

DeviceParams resolve_params(const ParamOptions& p) {
    const bool flags = p.tau0 || p.tau1 || p.theta || p.theta1 || p.theta2;
    if (!p.params.empty()) {
        if (flags) throw UsageError("--params cannot be combined with --tau0/--tau1/--theta*");
        const bool inline_json = p.params.find_first_not_of(" \t\n") != std::string::npos &&
                                 p.params[p.params.find_first_not_of(" \t\n")] == '{';
        const std::string text = inline_json ? p.params : read_file(p.params);
        return device_params_from_json(parse_json_text(text, inline_json ? "--params" : p.params));
    }
    if (!p.tau0 || !p.tau1) throw UsageError("device parameters required: --tau0, --tau1 and --theta (or --params)");
    if (p.theta && (p.theta1 || p.theta2)) throw UsageError("use either --theta or --theta1/--theta2");
    if (p.theta) return DeviceParams::tied(*p.tau0, *p.tau1, *p.theta);
    if (p.theta1 && p.theta2) return DeviceParams(*p.tau0, *p.tau1, *p.theta1, *p.theta2);
    throw UsageError("device parameters required: --theta, or both --theta1 and --theta2");
}

FockState to_input(const std::vector<int>& occ) {
    if (occ.size() != 3) throw UsageError("--input needs three occupations a,b,c");
    return FockState(occ);
}

int resolve_target(const FockState& in, int herald, std::optional<int> n) {
    if (herald < 0 || herald > in.total()) {
        throw UsageError("--herald must lie between 0 and the total photon number");
    }
    return n ? *n : in.total() - herald;
}

int max_photons_from_env() {
    const char* env = std::getenv("NOONFORGE_MAX_PHOTONS");
    if (!env || !*env) return kDefaultMaxPhotons;
    int v = 0;
    const char* end = env + std::char_traits<char>::length(env);
    const auto res = std::from_chars(env, end, v);
    if (res.ec != std::errc() || res.ptr != end || v < 1 || v > 64) {
        throw UsageError("NOONFORGE_MAX_PHOTONS must be an integer between 1 and 64");
    }
    return v;
}

double parse_number(const std::string& s, const std::string& what) {
    if (s == "pi") return std::numbers::pi;
    if (s == "2pi") return 2.0 * std::numbers::pi;
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw UsageError("invalid number '" + s + "' in " + what);
    }
    return v;
}

/// "lo:hi:count" or a single value.
GridAxis parse_axis(const std::string& spec, const std::string& what) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : spec) {
        if (ch == ':') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    parts.push_back(cur);
    if (parts.size() == 1) {
        const double v = parse_number(parts[0], what);
        return {v, v, 1};
    }
    if (parts.size() != 3) throw UsageError(what + " must be lo:hi:count");
    int count = 0;
    const auto& c = parts[2];
    const auto res = std::from_chars(c.data(), c.data() + c.size(), count);
    if (res.ec != std::errc() || res.ptr != c.data() + c.size() || count < 0) {
        throw UsageError(what + " count must be a non-negative integer");
    }
    return {parse_number(parts[0], what), parse_number(parts[1], what), count};
}

DeviceParams parse_init(const std::string& spec, bool tied) {
    std::vector<double> v;
    std::string cur;
    for (char ch : spec + ",") {
        if (ch == ',') {
            v.push_back(parse_number(cur, "--init"));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (tied && v.size() == 3) return DeviceParams::tied(v[0], v[1], v[2]);
    if (v.size() == 4) return DeviceParams(v[0], v[1], v[2], v[3]);
    throw UsageError("--init must be tau0,tau1,theta (or tau0,tau1,theta1,theta2 with --untied)");
}

// -- output -----------------------------------------------------------------

void round_floats(json& j, int precision) {
    if (j.is_number_float()) {
        const double x = j.get<double>();
        if (std::isfinite(x)) {
            const std::string s = format_double(x, precision);
            double y = 0.0;
            std::from_chars(s.data(), s.data() + s.size(), y);
            j = y;
        }
    } else if (j.is_structured()) {
        for (auto& e : j) round_floats(e, precision);
    }
}

class Sink {
public:
    explicit Sink(const std::string& path) {
        if (!path.empty() && path != "-") {
            file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
            if (!*file_) throw UsageError("cannot write '" + path + "'");
        }
    }
    std::ostream& os() { return file_ ? *file_ : std::cout; }
    void close() {
        os().flush();
        if (file_ && !*file_) throw std::runtime_error("write failed");
    }

private:
    std::unique_ptr<std::ofstream> file_;
};

void emit_json(json j, const OutputOptions& o) {
    round_floats(j, o.precision);
    Sink sink(o.out);
    sink.os() << j.dump(2) << '\n';
    sink.close();
}

std::string fmt(double x, int precision) { return format_double(x, precision); }

// -- subcommands ------------------------------------------------------------

int cmd_smatrix(const ParamOptions& po, const OutputOptions& o) {
    const DeviceParams p = resolve_params(po);
    const ScatteringMatrix s = build_smatrix(p);
    const double residual = unitarity_residual(s.matrix());
    if (o.format == "json") {
        emit_json(json{{"params", to_json(p)}, {"smatrix", to_json(s)}, {"unitarity_residual", residual}},
                  o);
    } else {
        Sink sink(o.out);
        sink.os() << "row,col,re,im\n";
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                sink.os() << r << ',' << c << ',' << fmt(s(r, c).real(), o.precision) << ','
                          << fmt(s(r, c).imag(), o.precision) << '\n';
            }
        }
        sink.close();
        std::cerr << "unitarity_residual " << fmt(residual, 3) << '\n';
    }
    return kExitOk;
}

int cmd_evolve(const ParamOptions& po, const std::vector<int>& occ, const OutputOptions& o,
               int max_photons) {
    const FockState in = to_input(occ);
    const DeviceParams p = resolve_params(po);
    const FockVector out = evolve(build_smatrix(p), in, max_photons);
    if (o.format == "json") {
        emit_json(json{{"params", to_json(p)}, {"input", in.occupations()}, {"state", to_json(out)}}, o);
    } else {
        Sink sink(o.out);
        sink.os() << "a,b,c,re,im\n";
        const auto basis = out.basis();
        for (std::size_t i = 0; i < basis.size(); ++i) {
            const Complex a = out.amplitudes()(static_cast<Eigen::Index>(i));
            if (std::abs(a) < kAmplitudeCutoff) continue;
            sink.os() << basis[i][0] << ',' << basis[i][1] << ',' << basis[i][2] << ','
                      << fmt(a.real(), o.precision) << ',' << fmt(a.imag(), o.precision) << '\n';
        }
        sink.close();
    }
    return kExitOk;
}

int cmd_herald(const ParamOptions& po, const std::vector<int>& occ, int herald, std::optional<int> n,
               const OutputOptions& o, int max_photons) {
    const FockState in = to_input(occ);
    const int n_target = resolve_target(in, herald, n);
    json report;
    if (in.total() == 0 && !any_set(po)) {
        // Vacuum input: the device plays no role.
        if (n_target != 0) throw UsageError("--n must be 0 for vacuum input");
        const auto proj = project_herald(FockVector::basis_state(in), {kModeB, herald});
        report = json{{"p_click", proj.p_click},
                      {"f_noon", nullptr},
                      {"n_target", 0},
                      {"conditional", to_json(proj.conditional)},
                      {"params", nullptr}};
    } else {
        report = to_json(run_experiment(resolve_params(po), in, {kModeB, herald}, n_target, max_photons));
    }
    if (o.format == "json") {
        emit_json(report, o);
    } else {
        Sink sink(o.out);
        sink.os() << "p_click,f_noon,n_target,tau0,tau1,theta1,theta2\n";
        sink.os() << fmt(report["p_click"].get<double>(), o.precision) << ',';
        if (!report["f_noon"].is_null()) sink.os() << fmt(report["f_noon"].get<double>(), o.precision);
        sink.os() << ',' << report["n_target"].get<int>();
        for (const char* k : {"tau0", "tau1", "theta1", "theta2"}) {
            sink.os() << ',';
            if (!report["params"].is_null()) sink.os() << fmt(report["params"][k].get<double>(), o.precision);
        }
        sink.os() << '\n';
        sink.close();
    }
    return kExitOk;
}

struct OptimizeFlags {
    std::vector<int> input{1, 2, 1};
    int herald = 1;
    std::optional<int> n;
    std::string mode = "auto";
    double lambda = 0.5;
    bool untied = false;
    std::vector<std::string> init;
    std::vector<int> grid{21, 21, 25};
    int restarts = 16;
    double tolerance = 1e-9;
    int max_evals = 20000;
    int manifold = 0;
    std::uint64_t seed = 1;
};

Objective make_objective(const OptimizeFlags& f, int max_photons) {
    Objective obj;
    obj.input = to_input(f.input);
    obj.herald = {kModeB, f.herald};
    obj.n_target = resolve_target(obj.input, f.herald, f.n);
    if (f.mode == "auto") {
        obj.mode = obj.n_target <= 3 ? ObjectiveMode::FidelityFirst : ObjectiveMode::WeightedSum;
    } else {
        obj.mode = f.mode == "fidelity-first" ? ObjectiveMode::FidelityFirst : ObjectiveMode::WeightedSum;
    }
    obj.lambda = f.lambda;
    obj.tie_thetas = !f.untied;
    obj.max_photons = max_photons;
    obj.validate();
    return obj;
}

json objective_json(const Objective& obj) {
    return json{{"input", obj.input.occupations()},
                {"herald", obj.herald.count},
                {"n_target", obj.n_target},
                {"mode", to_string(obj.mode)},
                {"lambda", obj.lambda},
                {"tie_thetas", obj.tie_thetas}};
}

int cmd_optimize(const OptimizeFlags& f, const OutputOptions& o, int max_photons) {
    const Objective obj = make_objective(f, max_photons);
    if (f.grid.size() != 3) throw UsageError("--grid needs three counts tau0,tau1,theta");
    OptimizerOptions opts;
    opts.grid = {f.grid[0], f.grid[1], f.grid[2]};
    opts.restarts = f.restarts;
    opts.nelder_mead.tolerance = f.tolerance;
    opts.nelder_mead.max_evaluations = f.max_evals;
    opts.workers = o.threads;
    for (const auto& s : f.init) opts.initial_guesses.push_back(parse_init(s, obj.tie_thetas));

    json out;
    std::optional<OptimizationResult> result;
    if (f.manifold > 0) {
        ManifoldOptions mo;
        mo.optimizer = opts;
        ManifoldSample m = explore_manifold(obj, f.manifold, f.seed, mo);
        result = std::move(m.base);
        m.base = OptimizationResult{};
        out = to_json(*result);
        out["manifold"] = to_json(m);
    } else {
        result = optimize(obj, f.seed, opts);
        out = to_json(*result);
    }
    out["objective"] = objective_json(obj);
    out["seed"] = f.seed;

    if (o.format == "json") {
        emit_json(out, o);
    } else {
        Sink sink(o.out);
        sink.os() << "restart,tau0,tau1,theta1,theta2,p_click,f_noon,evaluations,converged,feasible\n";
        for (const auto& r : result->restarts) {
            const DeviceParams p = obj.params(r.x);
            sink.os() << r.index << ',' << fmt(p.tau0(), o.precision) << ','
                      << fmt(p.tau1(), o.precision) << ',' << fmt(p.theta1(), o.precision) << ','
                      << fmt(p.theta2(), o.precision) << ',' << fmt(r.p_click, o.precision) << ',';
            if (r.f_noon) sink.os() << fmt(*r.f_noon, o.precision);
            sink.os() << ',' << r.evaluations << ',' << (r.converged ? 1 : 0) << ','
                      << (r.feasible ? 1 : 0) << '\n';
        }
        sink.close();
    }
    std::cerr << "status " << to_string(result->status) << '\n';
    return kExitOk;
}

struct SweepFlags {
    std::vector<int> input{1, 2, 1};
    int herald = 1;
    std::optional<int> n;
    std::string tau0 = "0:1:21";
    std::string tau1 = "0:1:21";
    std::string theta = "0:2pi:25";
    std::string theta2;
    bool pareto = false;
};

json sweep_row_json(const DeviceParams& p, std::optional<double> pc, std::optional<double> f) {
    json j = to_json(p);
    j["p_click"] = pc ? json(*pc) : json(nullptr);
    j["f_noon"] = f ? json(*f) : json(nullptr);
    return j;
}

int cmd_sweep(const SweepFlags& f, const OutputOptions& o, int max_photons) {
    const FockState in = to_input(f.input);
    const int n_target = resolve_target(in, f.herald, f.n);
    ParameterGrid grid{parse_axis(f.tau0, "--tau0"), parse_axis(f.tau1, "--tau1"),
                       parse_axis(f.theta, "--theta"), std::nullopt};
    if (!f.theta2.empty()) grid.theta2 = parse_axis(f.theta2, "--theta2");
    grid.validate();
    SweepOptions so;
    so.workers = o.threads;
    so.max_photons = max_photons;
    const HeraldSpec h{kModeB, f.herald};

    Sink sink(o.out);
    if (f.pareto) {
        ParetoFront front;
        sweep(grid, in, h, n_target, [&](const SweepRow& r) { front.add(r); }, so);
        if (o.format == "csv") {
            sink.os() << kSweepCsvHeader << '\n';
            for (const auto& q : front.points()) {
                SweepRow row;
                row.params = q.params;
                row.report = run_experiment(q.params, in, h, n_target, max_photons);
                write_sweep_csv_row(sink.os(), row, o.precision);
            }
        } else {
            json arr = json::array();
            for (const auto& q : front.points()) arr.push_back(sweep_row_json(q.params, q.p_click, q.f_noon));
            round_floats(arr, o.precision);
            sink.os() << arr.dump(2) << '\n';
        }
    } else if (o.format == "csv") {
        sink.os() << kSweepCsvHeader << '\n';
        sweep(grid, in, h, n_target, [&](const SweepRow& r) { write_sweep_csv_row(sink.os(), r, o.precision); },
              so);
    } else {
        json arr = json::array();
        sweep(grid, in, h, n_target,
              [&](const SweepRow& r) {
                  arr.push_back(sweep_row_json(r.params, r.report ? std::optional(r.report->p_click) : std::nullopt,
                                               r.report ? r.report->f_noon : std::nullopt));
              },
              so);
        round_floats(arr, o.precision);
        sink.os() << arr.dump(2) << '\n';
    }
    sink.close();
    return kExitOk;
}

// -- reproduce --------------------------------------------------------------

DeviceParams tied_from_json(const json& j) {
    return DeviceParams::tied(j.at("tau0").get<double>(), j.at("tau1").get<double>(),
                              j.at("theta").get<double>());
}

struct Fig2Row {
    int n = 0;
    std::string label;
    double p_click = 0.0;
    double f_noon = 0.0;
    std::optional<DeviceParams> params;
};

int cmd_reproduce(const std::string& name, const std::string& targets_path, const std::string& out_path,
                  std::uint64_t seed, const OutputOptions& o, int max_photons) {
    if (name != "fig2") throw UsageError("unknown reproduction '" + name + "' (available: fig2)");
    const json targets = parse_json_text(read_file(targets_path), targets_path);

    std::vector<Fig2Row> rows;
    std::vector<std::string> summary;
    bool ok = true;
    auto verdict = [&](bool pass) {
        ok = ok && pass;
        return pass ? "PASS" : "FAIL";
    };
    auto line = [&](std::ostringstream& ss) { summary.push_back(ss.str()); };

    try {
        for (const auto& t : targets.at("rows")) {
            const int n = t.at("N").get<int>();
            const std::string kind = t.at("kind").get<std::string>();
            if (kind == "reference") {
                Fig2Row r{n, t.at("label").get<std::string>(), t.at("p_click").get<double>(),
                          t.at("f_noon").get<double>(), std::nullopt};
                std::ostringstream ss;
                ss << "N=" << n << "  p_click=" << fmt(r.p_click, 6) << "  f_noon=" << fmt(r.f_noon, 6)
                   << "  (" << r.label << ")  REFERENCE";
                line(ss);
                rows.push_back(std::move(r));
                continue;
            }
            if (kind != "optimize") throw UsageError("unknown row kind '" + kind + "'");

            Objective obj;
            obj.input = FockState{1, n - 1, 1};
            obj.herald = {kModeB, 1};
            obj.n_target = n;
            obj.mode = t.at("mode").get<std::string>() == "fidelity-first" ? ObjectiveMode::FidelityFirst
                                                                          : ObjectiveMode::WeightedSum;
            obj.lambda = t.value("lambda", 0.5);
            obj.max_photons = max_photons;
            OptimizerOptions opts;
            opts.workers = o.threads;
            if (t.contains("init")) opts.initial_guesses.push_back(tied_from_json(t.at("init")));
            const auto res = optimize(obj, seed, opts);
            const double p = res.report.p_click;
            const double f = res.report.f_noon.value_or(0.0);
            rows.push_back({n, "", p, f, res.best});

            std::ostringstream ss;
            ss << "N=" << n << "  p_click=" << fmt(p, 6) << "  f_noon=" << fmt(f, 6)
               << "  optimized (" << to_string(obj.mode) << ", status " << to_string(res.status) << ")";
            if (t.contains("p_click")) {
                const double tp = t.at("p_click").get<double>();
                const double tf = t.at("f_noon").get<double>();
                const double dp = std::abs(p - tp);
                const double df = std::abs(f - tf);
                const bool pass = dp <= t.at("tol_p").get<double>() && df <= t.at("tol_f").get<double>();
                ss << "  target (" << fmt(tp, 6) << ", " << fmt(tf, 6) << ")  |dp|=" << fmt(dp, 2)
                   << " |df|=" << fmt(df, 2) << "  " << verdict(pass);
            } else {
                const bool pass = res.status == OptimizationStatus::Converged;
                ss << "  converged  " << verdict(pass);
            }
            line(ss);

            if (t.contains("check")) {
                const auto& c = t.at("check");
                const DeviceParams cp = tied_from_json(c.at("params"));
                const auto r = run_experiment(cp, obj.input, obj.herald, n, max_photons);
                const double cf = r.f_noon.value_or(0.0);
                const double tp = c.at("p_click").get<double>();
                const double tf = c.at("f_noon").get<double>();
                const bool pass = std::abs(r.p_click - tp) <= c.at("tol_p").get<double>() &&
                                  std::abs(cf - tf) <= c.at("tol_f").get<double>();
                std::ostringstream cs;
                cs << "N=" << n << "  p_click=" << fmt(r.p_click, 6) << "  f_noon=" << fmt(cf, 6)
                   << "  at tau0=" << fmt(cp.tau0(), 4) << " tau1=" << fmt(cp.tau1(), 4)
                   << " theta=" << fmt(cp.theta1(), 6) << "  target (" << fmt(tp, 6) << ", " << fmt(tf, 6)
                   << ")  " << verdict(pass);
                line(cs);
            }
        }

        if (targets.contains("trend")) {
            const auto over = targets.at("trend").at("over").get<std::vector<int>>();
            auto find = [&](int n) -> const Fig2Row& {
                for (const auto& r : rows) {
                    if (r.n == n && r.params) return r;
                }
                throw UsageError("trend refers to missing row N=" + std::to_string(n));
            };
            for (std::size_t i = 1; i < over.size(); ++i) {
                const auto& a = find(over[i - 1]);
                const auto& b = find(over[i]);
                const bool pass = b.p_click <= a.p_click && b.f_noon <= a.f_noon;
                std::ostringstream ss;
                ss << "trend N=" << a.n << " -> N=" << b.n << "  p_click " << fmt(a.p_click, 6) << " -> "
                   << fmt(b.p_click, 6) << ", f_noon " << fmt(a.f_noon, 6) << " -> " << fmt(b.f_noon, 6)
                   << "  non-increasing  " << verdict(pass);
                line(ss);
            }
        }
    } catch (const json::exception& e) {
        throw UsageError(std::string("malformed targets file: ") + e.what());
    }

    Sink sink(out_path);
    sink.os() << "N,p_click,f_noon,tau0,tau1,theta\n";
    for (const auto& r : rows) {
        sink.os() << r.n << ',' << fmt(r.p_click, o.precision) << ',' << fmt(r.f_noon, o.precision) << ',';
        if (r.params) {
            sink.os() << fmt(r.params->tau0(), o.precision) << ',' << fmt(r.params->tau1(), o.precision) << ','
                      << fmt(r.params->theta1(), o.precision);
        } else {
            sink.os() << ",,";
        }
        sink.os() << '\n';
    }
    sink.close();

    std::ostream& report = (out_path.empty() || out_path == "-") ? std::cerr : std::cout;
    for (const auto& s : summary) report << s << '\n';
    report << (ok ? "fig2: all checks passed" : "fig2: FAIL - at least one check outside tolerance") << '\n';
    return ok ? kExitOk : kExitReproduction;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heralded NOON-state generation in a double-microring, triple-waveguide device"};
    app.name("noonforge");
    app.require_subcommand(1);

    ParamOptions po;
    std::vector<int> input;
    int herald = 0;
    std::optional<int> n;

    OutputOptions smatrix_out;
    auto* smatrix = app.add_subcommand("smatrix", "Print the 3x3 scattering matrix and its unitarity residual");
    add_param_options(smatrix, po);
    add_output_options(smatrix, smatrix_out, "json");

    OutputOptions evolve_out;
    auto* evolve_cmd = app.add_subcommand("evolve", "Evolve a three-mode Fock input through the device");
    add_param_options(evolve_cmd, po);
    evolve_cmd->add_option("--input", input, "Input occupations a,b,c")->delimiter(',')->required();
    add_output_options(evolve_cmd, evolve_out, "json");

    OutputOptions herald_out;
    auto* herald_cmd = app.add_subcommand("herald", "Run a heralded experiment and report P_click and F_NOON");
    add_param_options(herald_cmd, po);
    herald_cmd->add_option("--input", input, "Input occupations a,b,c")->delimiter(',')->required();
    herald_cmd->add_option("--herald", herald, "Photons detected on mode b")->required();
    herald_cmd->add_option("--n", n, "NOON order (default: total photons minus herald)");
    add_output_options(herald_cmd, herald_out, "json");

    OptimizeFlags of;
    OutputOptions optimize_out;
    auto* optimize_cmd = app.add_subcommand("optimize", "Search device parameters for the best NOON output");
    optimize_cmd->add_option("--input", of.input, "Input occupations a,b,c")->delimiter(',')->capture_default_str();
    optimize_cmd->add_option("--herald", of.herald, "Photons detected on mode b")->capture_default_str();
    optimize_cmd->add_option("--n", of.n, "NOON order (default: total photons minus herald)");
    optimize_cmd->add_option("--mode", of.mode, "Objective: auto (fidelity-first for N<=3), fidelity-first, weighted-sum")
        ->check(CLI::IsMember({"auto", "fidelity-first", "weighted-sum"}))
        ->capture_default_str();
    optimize_cmd->add_option("--lambda", of.lambda, "Weight on F_NOON in weighted-sum mode")->capture_default_str();
    optimize_cmd->add_flag("--untied", of.untied, "Optimize theta1 and theta2 independently");
    optimize_cmd->add_option("--init", of.init, "Extra starting point tau0,tau1,theta (repeatable)");
    optimize_cmd->add_option("--grid", of.grid, "Seed grid counts tau0,tau1,theta")->delimiter(',')->capture_default_str();
    optimize_cmd->add_option("--restarts", of.restarts, "Nelder-Mead restarts")->check(CLI::PositiveNumber)->capture_default_str();
    optimize_cmd->add_option("--tolerance", of.tolerance, "Simplex diameter tolerance")->capture_default_str();
    optimize_cmd->add_option("--max-evals", of.max_evals, "Evaluation budget per restart")->check(CLI::PositiveNumber)->capture_default_str();
    optimize_cmd->add_option("--manifold", of.manifold, "Also sample up to this many distinct optima")->check(CLI::NonNegativeNumber);
    optimize_cmd->add_option("--seed", of.seed, "Random seed")->capture_default_str();
    add_output_options(optimize_cmd, optimize_out, "json");

    SweepFlags sf;
    OutputOptions sweep_out;
    std::uint64_t sweep_seed = 1;
    auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate a parameter grid (CSV by default)");
    sweep_cmd->add_option("--input", sf.input, "Input occupations a,b,c")->delimiter(',')->capture_default_str();
    sweep_cmd->add_option("--herald", sf.herald, "Photons detected on mode b")->capture_default_str();
    sweep_cmd->add_option("--n", sf.n, "NOON order (default: total photons minus herald)");
    sweep_cmd->add_option("--tau0", sf.tau0, "tau0 axis lo:hi:count")->capture_default_str();
    sweep_cmd->add_option("--tau1", sf.tau1, "tau1 axis lo:hi:count")->capture_default_str();
    sweep_cmd->add_option("--theta", sf.theta, "theta (theta1) axis lo:hi:count; pi and 2pi accepted")->capture_default_str();
    sweep_cmd->add_option("--theta2", sf.theta2, "Independent theta2 axis (default: theta2 = theta1)");
    sweep_cmd->add_flag("--pareto", sf.pareto, "Emit only the Pareto front of (P_click, F_NOON)");
    sweep_cmd->add_option("--seed", sweep_seed, "Accepted for uniformity; sweeps are deterministic");
    add_output_options(sweep_cmd, sweep_out, "csv");

    std::string repro_name;
    std::string targets = NOONFORGE_DEFAULT_TARGETS;
    std::string repro_csv = "fig2.csv";
    std::uint64_t repro_seed = 1;
    OutputOptions repro_opts;
    repro_opts.format = "csv";
    auto* repro = app.add_subcommand("reproduce", "Regenerate a stored result and compare with its targets");
    repro->add_option("name", repro_name, "Result to reproduce (fig2)")->required();
    repro->add_option("--targets", targets, "Targets file")->capture_default_str();
    repro->add_option("--out", repro_csv, "CSV output path ('-' for standard output)")->capture_default_str();
    repro->add_option("--seed", repro_seed, "Random seed")->capture_default_str();
    repro->add_option("--precision", repro_opts.precision, "Significant digits")->check(CLI::Range(1, 17));
    repro->add_option("--threads", repro_opts.threads, "Worker threads (0 = hardware concurrency)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        const int max_photons = max_photons_from_env();
        if (smatrix->parsed()) return cmd_smatrix(po, smatrix_out);
        if (evolve_cmd->parsed()) return cmd_evolve(po, input, evolve_out, max_photons);
        if (herald_cmd->parsed()) return cmd_herald(po, input, herald, n, herald_out, max_photons);
        if (optimize_cmd->parsed()) return cmd_optimize(of, optimize_out, max_photons);
        if (sweep_cmd->parsed()) return cmd_sweep(sf, sweep_out, max_photons);
        if (repro->parsed()) return cmd_reproduce(repro_name, targets, repro_csv, repro_seed, repro_opts, max_photons);
    } catch (const DegenerateDeviceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitDegenerate;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\nRun with --help for more information.\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}
