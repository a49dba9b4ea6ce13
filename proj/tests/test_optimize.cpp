#include "noonforge/optimize.hpp"

#include <cmath>
#include <numbers>

#include "gtest/gtest.h"

using namespace noonforge;

namespace {

constexpr double kPi = std::numbers::pi;

Objective vacuum_three() {
    Objective o;
    o.input = FockState{1, 1, 1};
    o.herald = {kModeB, 0};
    o.n_target = 3;
    return o;
}

Objective single_photon(int n) {
    Objective o;
    o.input = FockState{1, n - 1, 1};
    o.herald = {kModeB, 1};
    o.n_target = n;
    return o;
}

Objective weighted(int n) {
    Objective o = single_photon(n);
    o.mode = ObjectiveMode::WeightedSum;
    return o;
}

double accidental_weight(const DeviceParams& p) {
    const auto out = evolve(build_smatrix(p), FockState{1, 1, 1});
    return std::norm(out.amplitude({1, 0, 2})) + std::norm(out.amplitude({2, 0, 1}));
}

}  // namespace

// -- Nelder-Mead ------------------------------------------------------------

TEST(NelderMead, Quadratic) {
    auto f = [](const Eigen::VectorXd& x) {
        return std::pow(x(0) - 0.3, 2) + 4.0 * std::pow(x(1) - 0.7, 2) + 0.5 * x(0) * x(1);
    };
    const Eigen::Vector2d lo(-5, -5), hi(5, 5);
    const auto r = nelder_mead(f, Eigen::Vector2d(2, -1), Eigen::Vector2d(0.5, 0.5), lo, hi);
    // Stationary point of the quadratic.
    Eigen::Matrix2d h;
    h << 2.0, 0.5, 0.5, 8.0;
    const Eigen::Vector2d star = h.lu().solve(Eigen::Vector2d(0.6, 5.6));
    EXPECT_TRUE(r.converged);
    EXPECT_LT((r.x - star).norm(), 1e-4);
    EXPECT_LE(r.evaluations, 20000);
}

TEST(NelderMead, StaysInsideBox) {
    auto f = [](const Eigen::VectorXd& x) { return -x.sum(); };
    const Eigen::Vector3d lo(0, 0, 0), hi(1, 2, 3);
    const auto r = nelder_mead(f, Eigen::Vector3d(0.5, 0.5, 0.5), Eigen::Vector3d::Constant(0.1), lo, hi);
    EXPECT_NEAR(r.x(0), 1.0, 1e-6);
    EXPECT_NEAR(r.x(1), 2.0, 1e-6);
    EXPECT_NEAR(r.x(2), 3.0, 1e-6);
}

TEST(NelderMead, EvaluationBudget) {
    NelderMeadOptions o;
    o.max_evaluations = 50;
    o.tolerance = 0.0;
    auto f = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
    const auto r = nelder_mead(f, Eigen::Vector2d(1, 1), Eigen::Vector2d(0.1, 0.1),
                               Eigen::Vector2d(-2, -2), Eigen::Vector2d(2, 2), o);
    EXPECT_FALSE(r.converged);
    EXPECT_LE(r.evaluations, 52);
}

// -- objective --------------------------------------------------------------

TEST(Objective, Validation) {
    Objective o = single_photon(3);
    EXPECT_NO_THROW(o.validate());
    o.n_target = 4;
    EXPECT_THROW(o.validate(), DomainError);
    o = weighted(4);
    o.lambda = 1.5;
    EXPECT_THROW(o.validate(), DomainError);
    o = single_photon(3);
    o.box.tau0_hi = 1.2;
    EXPECT_THROW(o.validate(), DomainError);
    OptimizerOptions opts;
    opts.restarts = 0;
    EXPECT_THROW(optimize(single_photon(3), 1, opts), DomainError);
}

TEST(Objective, ParamsRoundTrip) {
    Objective o = single_photon(3);
    const DeviceParams p = DeviceParams::tied(0.2, 0.3, 1.0);
    EXPECT_EQ(o.params(o.point(p)), p);
    o.tie_thetas = false;
    const DeviceParams q(0.2, 0.3, 1.0, 2.0);
    EXPECT_EQ(o.dimension(), 4);
    EXPECT_EQ(o.params(o.point(q)), q);
}

// -- optimize ---------------------------------------------------------------

TEST(Optimize, VacuumHeraldThreeNoon) {
    const auto r = optimize(vacuum_three(), 1);
    EXPECT_EQ(r.status, OptimizationStatus::Converged);
    ASSERT_TRUE(r.report.f_noon);
    EXPECT_GE(*r.report.f_noon, 1.0 - 1e-6);
    EXPECT_NEAR(r.report.p_click, 4.0 / 9.0, 1e-6);
    EXPECT_LT(accidental_weight(r.best), 1e-10);
    EXPECT_EQ(r.trace.restarts, 16);
    EXPECT_EQ(r.trace.grid_points, 21u * 21u * 25u);
}

TEST(Optimize, SinglePhotonHeraldThreeNoon) {
    const auto r = optimize(single_photon(3), 1);
    EXPECT_EQ(r.status, OptimizationStatus::Converged);
    ASSERT_TRUE(r.report.f_noon);
    EXPECT_GE(*r.report.f_noon, 1.0 - 1e-6);
    EXPECT_NEAR(r.report.p_click, 8.0 / 27.0, 1e-6);
    EXPECT_NEAR(r.best.theta1(), kPi, 0.1);
}

TEST(Optimize, NeverExceedsProbabilityCeiling) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        OptimizerOptions opts;
        opts.restarts = 8;
        const auto r = optimize(vacuum_three(), seed, opts);
        EXPECT_LE(r.report.p_click, 4.0 / 9.0 + 1e-6) << "seed " << seed;
        for (const auto& rec : r.restarts) {
            if (rec.feasible) {
                EXPECT_LE(rec.p_click, 4.0 / 9.0 + 1e-6);
            }
        }
    }
}

TEST(Optimize, Deterministic) {
    OptimizerOptions a;
    a.workers = 1;
    OptimizerOptions b;
    b.workers = 4;
    const auto r1 = optimize(single_photon(3), 7, a);
    const auto r2 = optimize(single_photon(3), 7, b);
    const auto r3 = optimize(single_photon(3), 7, b);
    EXPECT_EQ(r1.best, r2.best);
    EXPECT_EQ(r2.best, r3.best);
    EXPECT_EQ(r1.report.p_click, r3.report.p_click);
    EXPECT_EQ(r1.trace.evaluations, r3.trace.evaluations);
}

TEST(Optimize, InitialGuessIsUsed) {
    OptimizerOptions opts;
    opts.initial_guesses = {DeviceParams::tied(0.25, 0.66, kPi)};
    const auto r = optimize(weighted(5), 1, opts);
    EXPECT_NE(r.status, OptimizationStatus::Infeasible);
    ASSERT_EQ(r.restarts.size(), 17u);
    EXPECT_NEAR(r.restarts.front().start(0), 0.25, 1e-15);
    EXPECT_TRUE(r.restarts.front().converged);
}

TEST(Optimize, FidelityFirstFourPhotonIsInfeasible) {
    const auto r = optimize(single_photon(4), 1);
    EXPECT_EQ(r.status, OptimizationStatus::Infeasible);
    ASSERT_TRUE(r.report.f_noon);
    EXPECT_LT(*r.report.f_noon, 1.0 - 1e-6);
}

TEST(Optimize, TrendOverPhotonNumber) {
    const auto r3 = optimize(single_photon(3), 1);
    const auto r4 = optimize(weighted(4), 1);
    OptimizerOptions o5;
    o5.initial_guesses = {DeviceParams::tied(0.25, 0.66, kPi)};
    const auto r5 = optimize(weighted(5), 1, o5);
    EXPECT_EQ(r5.status, OptimizationStatus::Converged);
    EXPECT_GE(r3.report.p_click, r4.report.p_click);
    EXPECT_GT(r4.report.p_click, r5.report.p_click);
    EXPECT_GE(*r3.report.f_noon, *r4.report.f_noon);
    EXPECT_GT(*r4.report.f_noon, *r5.report.f_noon);
}

TEST(Optimize, UntiedPhasesDoNoWorse) {
    Objective untied = single_photon(3);
    untied.tie_thetas = false;
    OptimizerOptions opts;
    opts.grid = {11, 11, 9};
    const auto r = optimize(untied, 1, opts);
    ASSERT_TRUE(r.report.f_noon);
    EXPECT_GE(*r.report.f_noon, 1.0 - 1e-6);
    EXPECT_GE(r.report.p_click, 8.0 / 27.0 - 1e-4);
}

// -- sweep ------------------------------------------------------------------

TEST(Sweep, EmptyAndSinglePoint) {
    ParameterGrid g{{0.1, 0.9, 0}, {0.2, 0.2, 1}, {1.0, 1.0, 1}, std::nullopt};
    EXPECT_TRUE(sweep_table(g, {1, 2, 1}, {kModeB, 1}, 3).empty());
    g.tau0.count = 1;
    const auto rows = sweep_table(g, {1, 2, 1}, {kModeB, 1}, 3);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].params, DeviceParams::tied(0.1, 0.2, 1.0));
    const auto direct = run_experiment(DeviceParams::tied(0.1, 0.2, 1.0), {1, 2, 1}, {kModeB, 1}, 3);
    ASSERT_TRUE(rows[0].report);
    EXPECT_EQ(rows[0].report->p_click, direct.p_click);
}

TEST(Sweep, RowMajorOrderAndChunking) {
    const ParameterGrid g{{0.1, 0.5, 3}, {0.2, 0.8, 4}, {0.0, 3.0, 5}, GridAxis{1.0, 2.0, 2}};
    SweepOptions small;
    small.chunk = 7;
    const auto rows = sweep_table(g, {1, 2, 1}, {kModeB, 1}, 3, small);
    ASSERT_EQ(rows.size(), 120u);
    for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].index, i);
    EXPECT_EQ(rows[1].params, DeviceParams(0.1, 0.2, 0.0, 2.0));
    EXPECT_EQ(rows[2].params, DeviceParams(0.1, 0.2, 0.75, 1.0));
    EXPECT_EQ(rows.back().params, DeviceParams(0.5, 0.8, 3.0, 2.0));
    const auto whole = sweep_table(g, {1, 2, 1}, {kModeB, 1}, 3);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i].report->p_click, whole[i].report->p_click);
    }
}

TEST(Sweep, ThetaScanPeaksAtPi) {
    const ParameterGrid g{{0.773556894152355, 0.773556894152355, 1},
                          {0.3227219577816681, 0.3227219577816681, 1},
                          {0.0, 2.0 * kPi, 101},
                          std::nullopt};
    const auto rows = sweep_table(g, {1, 2, 1}, {kModeB, 1}, 3);
    ASSERT_EQ(rows.size(), 101u);
    // theta = pi is the global fidelity maximum and a strict local maximum of
    // P_click; the global P_click maximum (~1/3 near theta = 0) has F ~ 0.07.
    std::size_t arg_f = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (*rows[i].report->f_noon > *rows[arg_f].report->f_noon) arg_f = i;
    }
    EXPECT_EQ(arg_f, 50u);
    for (std::size_t i = 40; i <= 60; ++i) {
        if (i != 50) {
            EXPECT_LT(rows[i].report->p_click, rows[50].report->p_click);
        }
    }
    EXPECT_GE(*rows[50].report->f_noon, 1.0 - 1e-6);
}

TEST(Sweep, DegeneratePointHasNoReport) {
    const ParameterGrid g{{1.0, 1.0, 1}, {0.5, 0.5, 1}, {0.0, 0.0, 1}, std::nullopt};
    const auto rows = sweep_table(g, {1, 2, 1}, {kModeB, 1}, 3);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_FALSE(rows[0].report);
}

TEST(Sweep, Validation) {
    const ParameterGrid big{{0, 1, 1000}, {0, 1, 1000}, {0, 6, 1000}, std::nullopt};
    EXPECT_THROW(sweep_table(big, {1, 2, 1}, {kModeB, 1}, 3), CapacityError);
    const ParameterGrid bad{{0, 1.5, 2}, {0, 1, 2}, {0, 6, 2}, std::nullopt};
    EXPECT_THROW(sweep_table(bad, {1, 2, 1}, {kModeB, 1}, 3), DomainError);
    const ParameterGrid reversed{{0.5, 0.1, 2}, {0, 1, 2}, {0, 6, 2}, std::nullopt};
    EXPECT_THROW(sweep_table(reversed, {1, 2, 1}, {kModeB, 1}, 3), DomainError);
}

// -- Pareto front -----------------------------------------------------------

TEST(Pareto, KeepsOnlyNonDominated) {
    ParetoFront f;
    const DeviceParams p = DeviceParams::tied(0.5, 0.5, 1.0);
    f.add(ParetoPoint{0.1, 0.9, p});
    f.add(ParetoPoint{0.3, 0.5, p});
    f.add(ParetoPoint{0.2, 0.4, p});  // dominated by (0.3, 0.5)
    f.add(ParetoPoint{0.2, 0.7, p});
    f.add(ParetoPoint{0.05, 0.95, p});
    f.add(ParetoPoint{0.1, 0.6, p});  // dominated
    f.add(ParetoPoint{0.35, 0.5, p}); // replaces (0.3, 0.5)
    ASSERT_EQ(f.points().size(), 4u);
    EXPECT_EQ(f.points()[0].p_click, 0.35);
    EXPECT_EQ(f.points()[1].p_click, 0.2);
    EXPECT_EQ(f.points()[2].p_click, 0.1);
    EXPECT_EQ(f.points()[3].p_click, 0.05);
}

TEST(Pareto, FromSweepRows) {
    const ParameterGrid g{{0.1, 0.9, 9}, {0.1, 0.9, 9}, {0.0, 2.0 * kPi, 13}, std::nullopt};
    const auto rows = sweep_table(g, {1, 3, 1}, {kModeB, 1}, 4);
    const auto front = pareto_front(rows);
    ASSERT_FALSE(front.empty());
    for (const auto& q : front) {
        for (const auto& r : rows) {
            if (!r.report || !r.report->f_noon) continue;
            const bool dominates = r.report->p_click > q.p_click && *r.report->f_noon > q.f_noon;
            EXPECT_FALSE(dominates);
        }
    }
    for (std::size_t i = 1; i < front.size(); ++i) {
        EXPECT_GT(front[i - 1].p_click, front[i].p_click);
        EXPECT_LT(front[i - 1].f_noon, front[i].f_noon);
    }
}

// -- manifold ---------------------------------------------------------------

TEST(Manifold, VacuumHeraldHasSeveralOptima) {
    const auto m = explore_manifold(vacuum_three(), 8, 1);
    EXPECT_EQ(m.status, ManifoldStatus::Ok) << m.message;
    ASSERT_GE(m.points.size(), 2u);
    EXPECT_GE(m.min_distance, 1e-4);
    for (std::size_t i = 0; i < m.points.size(); ++i) {
        const auto r = run_experiment(m.points[i], {1, 1, 1}, {kModeB, 0}, 3);
        EXPECT_GE(*r.f_noon, 1.0 - 1e-6);
        EXPECT_NEAR(r.p_click, 4.0 / 9.0, 1e-4);
    }
    EXPECT_GE(m.dimension, 0);
    EXPECT_LE(m.dimension, 3);
}

TEST(Manifold, SinglePhotonHeraldPointsReverify) {
    const auto m = explore_manifold(single_photon(3), 6, 2);
    ASSERT_GE(m.points.size(), 1u);
    for (const auto& p : m.points) {
        const auto r = run_experiment(p, {1, 2, 1}, {kModeB, 1}, 3);
        EXPECT_GE(*r.f_noon, 1.0 - 1e-6);
        EXPECT_GE(r.p_click, m.base.report.p_click - 1e-6);
    }
}

TEST(Manifold, InfeasibleTargetWarns) {
    const auto m = explore_manifold(single_photon(4), 4, 1);
    EXPECT_EQ(m.status, ManifoldStatus::Warning);
    EXPECT_EQ(m.dimension, 0);
    EXPECT_TRUE(m.points.empty());
    EXPECT_FALSE(m.message.empty());
}
