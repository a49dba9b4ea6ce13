#pragma once

// Parameter search over (tau0, tau1, theta) for heralded NOON generation.
//
// Default search: evaluate a coarse grid over the box, start Nelder-Mead from
// the best grid cells and from seeded random points, keep the best restart.
// FidelityFirst runs two stages per restart: minimize 1 - F, then maximize
// P_click with an exact penalty mu * sqrt(1 - F) that holds the simplex on the
// F = 1 set. A restart counts as feasible when F >= 1 - fidelity_tolerance.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "noonforge/device.hpp"
#include "noonforge/errors.hpp"
#include "noonforge/fock.hpp"
#include "noonforge/herald.hpp"
#include "noonforge/parallel.hpp"

namespace noonforge {

enum class ObjectiveMode { FidelityFirst, WeightedSum };

inline const char* to_string(ObjectiveMode m) {
    return m == ObjectiveMode::FidelityFirst ? "fidelity-first" : "weighted-sum";
}

struct ParamBox {
    double tau0_lo = 0.0;
    double tau0_hi = 1.0;
    double tau1_lo = 0.0;
    double tau1_hi = 1.0;
    double theta_lo = 0.0;
    double theta_hi = kTwoPi;
};

struct Objective {
    FockState input{1, 2, 1};
    HeraldSpec herald{kModeB, 1};
    int n_target = 3;
    ObjectiveMode mode = ObjectiveMode::FidelityFirst;
    /// Weight on F in WeightedSum mode: lambda * F + (1 - lambda) * P.
    double lambda = 0.5;
    ParamBox box;
    /// theta1 = theta2 (three free parameters) unless false.
    bool tie_thetas = true;
    int max_photons = kDefaultMaxPhotons;

    int dimension() const { return tie_thetas ? 3 : 4; }

    void validate() const {
        if (input.modes() != 3) throw DomainError("objective input must have three modes");
        if (herald.count < 0 || herald.count > input.total()) {
            throw DomainError("herald count outside [0, input photons]");
        }
        if (n_target < 1 || n_target != input.total() - herald.count) {
            throw DomainError("NOON order must equal the heralded photon number");
        }
        if (mode == ObjectiveMode::WeightedSum && !(lambda >= 0.0 && lambda <= 1.0)) {
            throw DomainError("lambda must lie in [0, 1]");
        }
        auto in_unit = [](double lo, double hi) { return 0.0 <= lo && lo <= hi && hi <= 1.0; };
        if (!in_unit(box.tau0_lo, box.tau0_hi) || !in_unit(box.tau1_lo, box.tau1_hi)) {
            throw DomainError("tau bounds must satisfy 0 <= lo <= hi <= 1");
        }
        if (!(std::isfinite(box.theta_lo) && std::isfinite(box.theta_hi) &&
              box.theta_lo <= box.theta_hi)) {
            throw DomainError("theta bounds must be finite with lo <= hi");
        }
        detail::check_capacity(input.total(), max_photons);
    }

    Eigen::VectorXd lower() const {
        Eigen::VectorXd v = Eigen::VectorXd::Constant(dimension(), box.theta_lo);
        v(0) = box.tau0_lo;
        v(1) = box.tau1_lo;
        return v;
    }
    Eigen::VectorXd upper() const {
        Eigen::VectorXd v = Eigen::VectorXd::Constant(dimension(), box.theta_hi);
        v(0) = box.tau0_hi;
        v(1) = box.tau1_hi;
        return v;
    }

    DeviceParams params(const Eigen::VectorXd& x) const {
        return {x(0), x(1), x(2), tie_thetas ? x(2) : x(3)};
    }

    Eigen::VectorXd point(const DeviceParams& p) const {
        Eigen::VectorXd x(dimension());
        if (tie_thetas) {
            x << p.tau0(), p.tau1(), p.theta1();
        } else {
            x << p.tau0(), p.tau1(), p.theta1(), p.theta2();
        }
        return x;
    }
};

// ---------------------------------------------------------------------------
// Nelder-Mead

struct NelderMeadOptions {
    /// Stop once every vertex lies within this distance of the best one.
    double tolerance = 1e-9;
    int max_evaluations = 20000;
};

struct NelderMeadResult {
    Eigen::VectorXd x;
    double value = 0.0;
    int evaluations = 0;
    double diameter = 0.0;
    bool converged = false;
};

/// Box-constrained Nelder-Mead: every trial point is clamped into [lo, hi].
template <typename F>
NelderMeadResult nelder_mead(F&& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                             const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                             const NelderMeadOptions& opts = {}) {
    const auto n = x0.size();
    auto clamp = [&](Eigen::VectorXd x) {
        return Eigen::VectorXd(x.cwiseMax(lo).cwiseMin(hi));
    };

    std::vector<Eigen::VectorXd> v;
    v.reserve(static_cast<std::size_t>(n + 1));
    v.push_back(clamp(x0));
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd y = v[0];
        y(i) += (y(i) + step(i) <= hi(i)) ? step(i) : -step(i);
        v.push_back(clamp(y));
    }

    int evals = 0;
    auto eval = [&](const Eigen::VectorXd& x) {
        ++evals;
        return f(x);
    };
    std::vector<double> fv;
    for (const auto& x : v) fv.push_back(eval(x));

    std::vector<std::size_t> order(v.size());
    auto diameter = [&] {
        double d = 0.0;
        for (std::size_t k = 1; k < order.size(); ++k) {
            d = std::max(d, (v[order[k]] - v[order[0]]).norm());
        }
        return d;
    };

    constexpr double kReflect = 1.0, kExpand = 2.0, kContract = 0.5, kShrink = 0.5;
    bool converged = false;
    for (;;) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        if (diameter() < opts.tolerance) {
            converged = true;
            break;
        }
        if (evals >= opts.max_evaluations) break;

        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[order.size() - 2];

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (std::size_t k = 0; k + 1 < order.size(); ++k) centroid += v[order[k]];
        centroid /= static_cast<double>(n);

        const Eigen::VectorXd xr = clamp(centroid + kReflect * (centroid - v[worst]));
        const double fr = eval(xr);
        if (fr < fv[best]) {
            const Eigen::VectorXd xe = clamp(centroid + kExpand * (xr - centroid));
            const double fe = eval(xe);
            if (fe < fr) {
                v[worst] = xe;
                fv[worst] = fe;
            } else {
                v[worst] = xr;
                fv[worst] = fr;
            }
            continue;
        }
        if (fr < fv[second]) {
            v[worst] = xr;
            fv[worst] = fr;
            continue;
        }
        const bool outside = fr < fv[worst];
        const Eigen::VectorXd xc = outside ? clamp(centroid + kContract * (xr - centroid))
                                           : clamp(centroid + kContract * (v[worst] - centroid));
        const double fc = eval(xc);
        if (fc < (outside ? fr : fv[worst])) {
            v[worst] = xc;
            fv[worst] = fc;
            continue;
        }
        for (std::size_t k = 1; k < order.size(); ++k) {
            const std::size_t i = order[k];
            v[i] = clamp(v[best] + kShrink * (v[i] - v[best]));
            fv[i] = eval(v[i]);
        }
    }

    NelderMeadResult r;
    r.x = v[order.front()];
    r.value = fv[order.front()];
    r.evaluations = evals;
    r.diameter = diameter();
    r.converged = converged;
    return r;
}

// ---------------------------------------------------------------------------
// Objective evaluation

struct Score {
    double p_click = 0.0;
    std::optional<double> f_noon;
    bool degenerate = false;
};

inline Score score(const Objective& obj, const Eigen::VectorXd& x) {
    try {
        const HeraldReport r =
            run_experiment(obj.params(x), obj.input, obj.herald, obj.n_target, obj.max_photons);
        return {r.p_click, r.f_noon, false};
    } catch (const DegenerateDeviceError&) {
        return {0.0, std::nullopt, true};
    }
}

namespace detail {

inline constexpr double kDegenerateLoss = 3.0;
inline constexpr double kSilentHeraldLoss = 2.0;
/// Exact-penalty weight on sqrt(1 - F) in the probability stage.
inline constexpr double kFidelityPenalty = 10.0;

inline double fidelity_loss(const Score& s) {
    if (s.degenerate) return kDegenerateLoss;
    if (!s.f_noon) return kSilentHeraldLoss;
    return 1.0 - *s.f_noon;
}

inline double probability_loss(const Score& s) {
    if (s.degenerate) return kDegenerateLoss;
    if (!s.f_noon) return kSilentHeraldLoss;
    return -s.p_click + kFidelityPenalty * std::sqrt(std::max(0.0, 1.0 - *s.f_noon));
}

inline double weighted_loss(const Score& s, double lambda) {
    if (s.degenerate) return kDegenerateLoss;
    return -(lambda * s.f_noon.value_or(0.0) + (1.0 - lambda) * s.p_click);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// optimize

struct OptimizerOptions {
    /// Grid cells along tau0, tau1, theta (theta2 reuses the theta count).
    std::array<int, 3> grid{21, 21, 25};
    int restarts = 16;
    NelderMeadOptions nelder_mead;
    /// Feasibility threshold for FidelityFirst: F >= 1 - fidelity_tolerance.
    double fidelity_tolerance = 1e-6;
    /// Extra starting points, tried before the grid and random seeds.
    std::vector<DeviceParams> initial_guesses;
    unsigned workers = 0;
};

enum class OptimizationStatus { Converged, Stalled, Infeasible };

inline const char* to_string(OptimizationStatus s) {
    switch (s) {
        case OptimizationStatus::Converged: return "converged";
        case OptimizationStatus::Stalled: return "stalled";
        case OptimizationStatus::Infeasible: return "infeasible";
    }
    return "unknown";
}

struct OptimizationTrace {
    long long evaluations = 0;
    int restarts = 0;
    std::size_t grid_points = 0;
    double final_simplex_size = 0.0;
    int best_restart = -1;
};

/// One local search, kept for the optional CSV trace.
struct RestartRecord {
    int index = 0;
    Eigen::VectorXd start;
    Eigen::VectorXd x;
    double p_click = 0.0;
    std::optional<double> f_noon;
    int evaluations = 0;
    double diameter = 0.0;
    bool converged = false;
    bool feasible = false;
};

struct OptimizationResult {
    DeviceParams best;
    HeraldReport report;
    OptimizationTrace trace;
    OptimizationStatus status = OptimizationStatus::Stalled;
    ObjectiveMode mode = ObjectiveMode::FidelityFirst;
    std::vector<RestartRecord> restarts;
};

namespace detail {

struct Seed {
    Eigen::VectorXd x;
    Eigen::VectorXd step;
};

/// Cell-centre grid over the box, returning the best `keep` cells as seeds.
inline std::vector<Seed> grid_seeds(const Objective& obj, const OptimizerOptions& opts,
                                    std::size_t keep, std::size_t& evaluated) {
    const int dim = obj.dimension();
    std::vector<int> counts{opts.grid[0], opts.grid[1], opts.grid[2]};
    if (dim == 4) counts.push_back(opts.grid[2]);
    std::size_t total = 1;
    for (int c : counts) {
        if (c < 1) throw DomainError("grid counts must be positive");
        total *= static_cast<std::size_t>(c);
    }
    evaluated = total;

    const Eigen::VectorXd lo = obj.lower();
    const Eigen::VectorXd hi = obj.upper();
    Eigen::VectorXd width(dim);
    for (int d = 0; d < dim; ++d) width(d) = (hi(d) - lo(d)) / counts[static_cast<std::size_t>(d)];

    auto cell = [&](std::size_t flat) {
        Eigen::VectorXd x(dim);
        for (int d = dim - 1; d >= 0; --d) {
            const auto c = static_cast<std::size_t>(counts[static_cast<std::size_t>(d)]);
            x(d) = lo(d) + (static_cast<double>(flat % c) + 0.5) * width(d);
            flat /= c;
        }
        return x;
    };

    struct Ranked {
        double primary;
        double secondary;
    };
    std::vector<Ranked> ranks(total);
    parallel_for(total, opts.workers, [&](std::size_t i) {
        const Score s = score(obj, cell(i));
        if (obj.mode == ObjectiveMode::FidelityFirst) {
            ranks[i] = {fidelity_loss(s), -s.p_click};
        } else {
            ranks[i] = {weighted_loss(s, obj.lambda), 0.0};
        }
    });

    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    const std::size_t k = std::min(keep, total);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (ranks[a].primary != ranks[b].primary) {
                              return ranks[a].primary < ranks[b].primary;
                          }
                          if (ranks[a].secondary != ranks[b].secondary) {
                              return ranks[a].secondary < ranks[b].secondary;
                          }
                          return a < b;
                      });
    std::vector<Seed> seeds;
    for (std::size_t i = 0; i < k; ++i) seeds.push_back({cell(idx[i]), width});
    return seeds;
}

inline RestartRecord local_search(const Objective& obj, const Seed& seed,
                                  const OptimizerOptions& opts) {
    const Eigen::VectorXd lo = obj.lower();
    const Eigen::VectorXd hi = obj.upper();
    RestartRecord rec;
    rec.start = seed.x;

    auto finish = [&](const NelderMeadResult& r) {
        rec.x = r.x;
        rec.diameter = r.diameter;
        rec.converged = r.converged;
        rec.evaluations += r.evaluations;
    };

    if (obj.mode == ObjectiveMode::WeightedSum) {
        const auto r = nelder_mead(
            [&](const Eigen::VectorXd& x) { return weighted_loss(score(obj, x), obj.lambda); },
            seed.x, seed.step, lo, hi, opts.nelder_mead);
        finish(r);
        const Score s = score(obj, rec.x);
        rec.p_click = s.p_click;
        rec.f_noon = s.f_noon;
        rec.feasible = !s.degenerate;
        return rec;
    }

    const auto stage1 = nelder_mead(
        [&](const Eigen::VectorXd& x) { return fidelity_loss(score(obj, x)); }, seed.x, seed.step,
        lo, hi, opts.nelder_mead);
    finish(stage1);
    Score s = score(obj, rec.x);
    const double threshold = 1.0 - opts.fidelity_tolerance;
    if (s.f_noon && *s.f_noon >= threshold) {
        const Eigen::VectorXd step2 = (seed.step * 0.1).cwiseMax(1e-3);
        const auto stage2 = nelder_mead(
            [&](const Eigen::VectorXd& x) { return probability_loss(score(obj, x)); }, rec.x,
            step2, lo, hi, opts.nelder_mead);
        const Score s2 = score(obj, stage2.x);
        rec.evaluations += stage2.evaluations;
        if (s2.f_noon && *s2.f_noon >= threshold) {
            rec.x = stage2.x;
            rec.diameter = stage2.diameter;
            rec.converged = stage2.converged;
            s = s2;
        }
    }
    rec.p_click = s.p_click;
    rec.f_noon = s.f_noon;
    rec.feasible = s.f_noon && *s.f_noon >= threshold;
    return rec;
}

/// True when a should replace b as the incumbent.
inline bool better(const Objective& obj, const RestartRecord& a, const RestartRecord& b) {
    if (obj.mode == ObjectiveMode::WeightedSum) {
        const double la = -(obj.lambda * a.f_noon.value_or(0.0) + (1.0 - obj.lambda) * a.p_click);
        const double lb = -(obj.lambda * b.f_noon.value_or(0.0) + (1.0 - obj.lambda) * b.p_click);
        return la < lb;
    }
    if (a.feasible != b.feasible) return a.feasible;
    if (a.feasible) return a.p_click > b.p_click;
    return a.f_noon.value_or(-1.0) > b.f_noon.value_or(-1.0);
}

inline Eigen::VectorXd uniform_point(const Objective& obj, std::mt19937_64& rng) {
    const Eigen::VectorXd lo = obj.lower();
    const Eigen::VectorXd hi = obj.upper();
    Eigen::VectorXd x(lo.size());
    for (Eigen::Index d = 0; d < lo.size(); ++d) {
        // 53 random bits -> [0, 1); avoids implementation-defined distributions.
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        x(d) = lo(d) + u * (hi(d) - lo(d));
    }
    return x;
}

inline std::vector<RestartRecord> run_restarts(const Objective& obj, const std::vector<Seed>& seeds,
                                               const OptimizerOptions& opts) {
    std::vector<RestartRecord> out(seeds.size());
    parallel_for(seeds.size(), opts.workers, [&](std::size_t i) {
        out[i] = local_search(obj, seeds[i], opts);
        out[i].index = static_cast<int>(i);
    });
    return out;
}

}  // namespace detail

/// Grid-seeded multi-start Nelder-Mead. Deterministic for a given (obj, seed, opts).
inline OptimizationResult optimize(const Objective& obj, std::uint64_t seed,
                                   const OptimizerOptions& opts = {}) {
    obj.validate();
    if (opts.restarts < 1) throw DomainError("restarts must be positive");

    const Eigen::VectorXd lo = obj.lower();
    const Eigen::VectorXd hi = obj.upper();
    const Eigen::VectorXd default_step = ((hi - lo) * 0.05).cwiseMax(1e-6);

    std::vector<detail::Seed> seeds;
    for (const auto& g : opts.initial_guesses) {
        seeds.push_back({obj.point(g).cwiseMax(lo).cwiseMin(hi), default_step});
    }
    const auto n_grid = static_cast<std::size_t>((opts.restarts + 1) / 2);
    std::size_t grid_points = 0;
    for (auto& s : detail::grid_seeds(obj, opts, n_grid, grid_points)) seeds.push_back(std::move(s));
    std::mt19937_64 rng(seed);
    while (seeds.size() < opts.initial_guesses.size() + static_cast<std::size_t>(opts.restarts)) {
        seeds.push_back({detail::uniform_point(obj, rng), default_step * 2.0});
    }

    auto records = detail::run_restarts(obj, seeds, opts);

    std::size_t best = 0;
    long long evals = static_cast<long long>(grid_points);
    for (std::size_t i = 0; i < records.size(); ++i) {
        evals += records[i].evaluations;
        if (i > 0 && detail::better(obj, records[i], records[best])) best = i;
    }

    OptimizationResult res;
    res.mode = obj.mode;
    res.best = obj.params(records[best].x);
    res.report = run_experiment(res.best, obj.input, obj.herald, obj.n_target, obj.max_photons);
    res.trace.evaluations = evals;
    res.trace.restarts = static_cast<int>(records.size());
    res.trace.grid_points = grid_points;
    res.trace.final_simplex_size = records[best].diameter;
    res.trace.best_restart = static_cast<int>(best);
    if (obj.mode == ObjectiveMode::FidelityFirst && !records[best].feasible) {
        res.status = OptimizationStatus::Infeasible;
    } else {
        res.status = records[best].converged ? OptimizationStatus::Converged
                                             : OptimizationStatus::Stalled;
    }
    res.restarts = std::move(records);
    return res;
}

// ---------------------------------------------------------------------------
// sweep

inline constexpr std::size_t kMaxSweepPoints = 10'000'000;

/// `count` evenly spaced values from lo to hi inclusive (lo alone when count = 1).
struct GridAxis {
    double lo = 0.0;
    double hi = 0.0;
    int count = 0;

    double at(int i) const {
        if (count <= 1) return lo;
        return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    }
};

struct ParameterGrid {
    GridAxis tau0;
    GridAxis tau1;
    GridAxis theta1;
    /// Absent: theta2 = theta1.
    std::optional<GridAxis> theta2;

    std::size_t size() const {
        std::size_t n = static_cast<std::size_t>(std::max(tau0.count, 0)) *
                        static_cast<std::size_t>(std::max(tau1.count, 0)) *
                        static_cast<std::size_t>(std::max(theta1.count, 0));
        if (theta2) n *= static_cast<std::size_t>(std::max(theta2->count, 0));
        return n;
    }

    /// Row-major: tau0 outermost, then tau1, theta1, theta2.
    DeviceParams at(std::size_t flat) const {
        int i3 = 0;
        if (theta2) {
            i3 = static_cast<int>(flat % static_cast<std::size_t>(theta2->count));
            flat /= static_cast<std::size_t>(theta2->count);
        }
        const int i2 = static_cast<int>(flat % static_cast<std::size_t>(theta1.count));
        flat /= static_cast<std::size_t>(theta1.count);
        const int i1 = static_cast<int>(flat % static_cast<std::size_t>(tau1.count));
        flat /= static_cast<std::size_t>(tau1.count);
        const int i0 = static_cast<int>(flat);
        const double th1 = theta1.at(i2);
        return {tau0.at(i0), tau1.at(i1), th1, theta2 ? theta2->at(i3) : th1};
    }

    void validate() const {
        auto check = [](const GridAxis& a, bool unit, const char* name) {
            if (a.count < 0) throw DomainError(std::string(name) + " count must be non-negative");
            if (!(std::isfinite(a.lo) && std::isfinite(a.hi) && a.lo <= a.hi)) {
                throw DomainError(std::string(name) + " range must be finite with lo <= hi");
            }
            if (unit && (a.lo < 0.0 || a.hi > 1.0)) {
                throw DomainError(std::string(name) + " range must lie in [0, 1]");
            }
        };
        check(tau0, true, "tau0");
        check(tau1, true, "tau1");
        check(theta1, false, "theta1");
        if (theta2) check(*theta2, false, "theta2");
        // Overflow-safe size check.
        long double n = static_cast<long double>(tau0.count) * tau1.count * theta1.count;
        if (theta2) n *= theta2->count;
        if (n > static_cast<long double>(kMaxSweepPoints)) {
            throw CapacityError("sweep grid exceeds " + std::to_string(kMaxSweepPoints) + " points");
        }
    }
};

struct SweepRow {
    std::size_t index = 0;
    DeviceParams params;
    /// Empty at degenerate parameter points.
    std::optional<HeraldReport> report;
};

struct SweepOptions {
    unsigned workers = 0;
    std::size_t chunk = 4096;
    int max_photons = kDefaultMaxPhotons;
};

/// Evaluates every grid point and hands rows to `sink` in grid order.
template <typename Sink>
void sweep(const ParameterGrid& grid, const FockState& input, const HeraldSpec& herald,
           int n_target, Sink&& sink, const SweepOptions& opts = {}) {
    grid.validate();
    const std::size_t total = grid.size();
    std::vector<SweepRow> buf;
    for (std::size_t start = 0; start < total; start += opts.chunk) {
        const std::size_t len = std::min(opts.chunk, total - start);
        buf.assign(len, SweepRow{});
        parallel_for(len, opts.workers, [&](std::size_t k) {
            SweepRow& row = buf[k];
            row.index = start + k;
            row.params = grid.at(start + k);
            try {
                row.report = run_experiment(row.params, input, herald, n_target, opts.max_photons);
            } catch (const DegenerateDeviceError&) {
                row.report.reset();
            }
        });
        for (const auto& row : buf) sink(row);
    }
}

inline std::vector<SweepRow> sweep_table(const ParameterGrid& grid, const FockState& input,
                                         const HeraldSpec& herald, int n_target,
                                         const SweepOptions& opts = {}) {
    std::vector<SweepRow> rows;
    sweep(grid, input, herald, n_target, [&](const SweepRow& r) { rows.push_back(r); }, opts);
    return rows;
}

struct ParetoPoint {
    double p_click = 0.0;
    double f_noon = 0.0;
    DeviceParams params;
};

/// Non-dominated set of (P_click, F_NOON), both maximized. Order: P descending.
class ParetoFront {
public:
    void add(const ParetoPoint& q) {
        for (const auto& p : front_) {
            if (p.p_click >= q.p_click && p.f_noon >= q.f_noon) return;
        }
        std::erase_if(front_, [&](const ParetoPoint& p) {
            return q.p_click >= p.p_click && q.f_noon >= p.f_noon;
        });
        auto pos = std::find_if(front_.begin(), front_.end(),
                                [&](const ParetoPoint& p) { return p.p_click < q.p_click; });
        front_.insert(pos, q);
    }

    void add(const SweepRow& row) {
        if (row.report && row.report->f_noon) {
            add(ParetoPoint{row.report->p_click, *row.report->f_noon, row.params});
        }
    }

    const std::vector<ParetoPoint>& points() const { return front_; }

private:
    std::vector<ParetoPoint> front_;
};

inline std::vector<ParetoPoint> pareto_front(std::span<const SweepRow> rows) {
    ParetoFront front;
    for (const auto& r : rows) front.add(r);
    return front.points();
}

// ---------------------------------------------------------------------------
// explore_manifold

struct ManifoldOptions {
    /// Members need F >= 1 - fidelity_tolerance ...
    double fidelity_tolerance = 1e-6;
    /// ... and P >= P* - probability_tolerance.
    double probability_tolerance = 1e-6;
    /// Members must be at least this far apart in parameter space.
    double min_separation = 1e-4;
    /// Continuation step along estimated tangent directions.
    double continuation_step = 0.02;
    int continuation_steps = 4;
    double fd_step = 1e-6;
    /// Singular values below rank_tolerance * sigma_max count as zero.
    double rank_tolerance = 1e-5;
    OptimizerOptions optimizer;
};

enum class ManifoldStatus { Ok, Warning };

struct ManifoldSample {
    std::vector<DeviceParams> points;
    std::vector<HeraldReport> reports;
    double min_distance = 0.0;
    double mean_distance = 0.0;
    double max_distance = 0.0;
    int tangent_rank = 0;
    int dimension = 0;
    ManifoldStatus status = ManifoldStatus::Warning;
    std::string message;
    OptimizationResult base;
};

/// Real constraint vector that vanishes on the optimum set: re/im of every
/// non-NOON conditional amplitude, |c_N0| - |c_0N|, and P - P*.
inline Eigen::VectorXd manifold_constraints(const Objective& obj, const Eigen::VectorXd& x,
                                            double p_star) {
    const HeraldReport r =
        run_experiment(obj.params(x), obj.input, obj.herald, obj.n_target, obj.max_photons);
    const int n = obj.n_target;
    const auto basis = enumerate_basis(n, 2, n);
    Eigen::VectorXd c(2 * static_cast<Eigen::Index>(basis.size() - 2) + 2);
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const Complex a = r.conditional.amplitudes()(static_cast<Eigen::Index>(i));
        if (i == 0 || i + 1 == basis.size()) continue;
        c(k++) = a.real();
        c(k++) = a.imag();
    }
    c(k++) = std::abs(r.conditional.amplitude({n, 0})) - std::abs(r.conditional.amplitude({0, n}));
    c(k++) = r.p_click - p_star;
    return c;
}

/// Numerical rank of the constraint Jacobian (central differences) and the
/// right-singular vectors spanning its null space.
inline int constraint_rank(const Objective& obj, const Eigen::VectorXd& x, double p_star,
                           const ManifoldOptions& opts, Eigen::MatrixXd* null_space = nullptr) {
    const Eigen::VectorXd lo = obj.lower();
    const Eigen::VectorXd hi = obj.upper();
    const Eigen::VectorXd c0 = manifold_constraints(obj, x, p_star);
    Eigen::MatrixXd jac(c0.size(), x.size());
    for (Eigen::Index d = 0; d < x.size(); ++d) {
        Eigen::VectorXd xp = x, xm = x;
        xp(d) = std::min(hi(d), x(d) + opts.fd_step);
        xm(d) = std::max(lo(d), x(d) - opts.fd_step);
        jac.col(d) = (manifold_constraints(obj, xp, p_star) - manifold_constraints(obj, xm, p_star)) /
                     (xp(d) - xm(d));
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double cut = opts.rank_tolerance * std::max(1.0, sv.size() ? sv(0) : 0.0);
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > cut) ++rank;
    }
    if (null_space) *null_space = svd.matrixV().rightCols(x.size() - rank);
    return rank;
}

inline ManifoldSample explore_manifold(const Objective& obj, int n_samples, std::uint64_t seed,
                                       const ManifoldOptions& opts = {}) {
    if (n_samples < 1) throw DomainError("n_samples must be positive");
    ManifoldSample out;
    out.base = optimize(obj, seed, opts.optimizer);
    const auto& base = out.base;

    const double f_min = 1.0 - opts.fidelity_tolerance;
    if (!base.report.f_noon || *base.report.f_noon < f_min) {
        out.dimension = 0;
        out.status = ManifoldStatus::Warning;
        out.message = "no optimum with F_NOON >= 1 - tolerance; feasible set is empty";
        return out;
    }
    const double p_star = base.report.p_click;
    const Eigen::VectorXd lo = obj.lower();
    const Eigen::VectorXd hi = obj.upper();
    const Eigen::VectorXd x_best = obj.point(base.best);

    std::vector<Eigen::VectorXd> accepted;
    auto try_accept = [&](const Eigen::VectorXd& x) {
        if (static_cast<int>(accepted.size()) >= n_samples) return;
        HeraldReport r;
        try {
            r = run_experiment(obj.params(x), obj.input, obj.herald, obj.n_target, obj.max_photons);
        } catch (const DegenerateDeviceError&) {
            return;
        }
        if (!r.f_noon || *r.f_noon < f_min || r.p_click < p_star - opts.probability_tolerance) return;
        for (const auto& y : accepted) {
            if ((y - x).norm() <= opts.min_separation) return;
        }
        accepted.push_back(x);
        out.points.push_back(r.params);
        out.reports.push_back(std::move(r));
    };
    try_accept(x_best);

    Eigen::MatrixXd null_space;
    out.tangent_rank = constraint_rank(obj, x_best, p_star, opts, &null_space);

    // Continuation: step along each tangent direction, then re-project.
    std::vector<detail::Seed> starts;
    const Eigen::VectorXd small_step = Eigen::VectorXd::Constant(x_best.size(), 1e-3);
    for (Eigen::Index j = 0; j < null_space.cols(); ++j) {
        for (int k = 1; k <= opts.continuation_steps; ++k) {
            for (double sign : {1.0, -1.0}) {
                const Eigen::VectorXd x =
                    x_best + sign * k * opts.continuation_step * null_space.col(j);
                starts.push_back({x.cwiseMax(lo).cwiseMin(hi), small_step});
            }
        }
    }
    // Random restarts.
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    const Eigen::VectorXd wide = ((hi - lo) * 0.1).cwiseMax(1e-6);
    for (int i = 0; i < n_samples; ++i) starts.push_back({detail::uniform_point(obj, rng), wide});

    for (const auto& rec : detail::run_restarts(obj, starts, opts.optimizer)) try_accept(rec.x);

    const auto m = accepted.size();
    if (m < 2) {
        out.dimension = 0;
        out.status = ManifoldStatus::Warning;
        out.message = "fewer than two distinct optima found";
        return out;
    }
    double sum = 0.0;
    out.min_distance = std::numeric_limits<double>::infinity();
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            const double d = (accepted[i] - accepted[j]).norm();
            out.min_distance = std::min(out.min_distance, d);
            out.max_distance = std::max(out.max_distance, d);
            sum += d;
            ++pairs;
        }
    }
    out.mean_distance = sum / static_cast<double>(pairs);
    out.dimension = obj.dimension() - out.tangent_rank;
    out.status = ManifoldStatus::Ok;
    return out;
}

}  // namespace noonforge
