#include "noonforge/device.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "gtest/gtest.h"

using namespace noonforge;

namespace {

constexpr double kPi = std::numbers::pi;

// Generic port-network reduction. Junction ports are numbered
//   U2 top:    in {a, ring1}            out {a, ring1}
//   U3 centre: in {ring1, b, ring2}     out {ring1, b, ring2}
//   U2 bottom: in {c, ring2}            out {c, ring2}
// Stacking them gives a 7x7 block-diagonal A. Internal outputs feed internal
// inputs through arcs with phases; the external S follows from
//   S = A_ee + A_ei P (I - A_ii P)^-1 A_ie.
Eigen::Matrix3cd network_oracle(const DeviceParams& p, double split = 0.5) {
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(7, 7);
    const double t0 = p.tau0();
    const double k0 = std::sqrt(1.0 - t0 * t0);
    const double t1 = p.tau1();
    const double k1 = std::sqrt(2.0 * t1 * (1.0 - t1));
    a.block(0, 0, 2, 2) << t0, k0, -k0, t0;
    a.block(2, 2, 3, 3) << t1, -k1, t1 - 1.0, -k1, 1.0 - 2.0 * t1, -k1, t1 - 1.0, -k1, t1;
    a.block(5, 5, 2, 2) << t0, k0, -k0, t0;

    // External ports: a = 0, b = 3, c = 5. Internal: 1, 2, 4, 6.
    const int ext[3] = {0, 3, 5};
    const int in[4] = {1, 2, 4, 6};
    Eigen::MatrixXcd aee(3, 3), aei(3, 4), aie(4, 3), aii(4, 4);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) aee(r, c) = a(ext[r], ext[c]);
        for (int c = 0; c < 4; ++c) aei(r, c) = a(ext[r], in[c]);
    }
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 3; ++c) aie(r, c) = a(in[r], ext[c]);
        for (int c = 0; c < 4; ++c) aii(r, c) = a(in[r], in[c]);
    }
    // P(input port, output port): which internal output feeds which internal input.
    const Complex i(0.0, 1.0);
    Eigen::Matrix4cd ph = Eigen::Matrix4cd::Zero();
    ph(1, 0) = std::exp(i * (split * p.theta1()));          // top ring out -> centre ring1 in
    ph(0, 1) = std::exp(i * ((1.0 - split) * p.theta1()));  // centre ring1 out -> top ring in
    ph(2, 3) = std::exp(i * (split * p.theta2()));          // bottom ring out -> centre ring2 in
    ph(3, 2) = std::exp(i * ((1.0 - split) * p.theta2()));  // centre ring2 out -> bottom ring in
    const Eigen::Matrix4cd loop = Eigen::Matrix4cd::Identity() - aii * ph;
    return aee + aei * ph * loop.inverse() * aie;
}

DeviceParams random_params(std::mt19937_64& rng, double tau0_max = 1.0) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    return {unit(rng) * tau0_max, unit(rng), phase(rng), phase(rng)};
}

}  // namespace

TEST(DeviceParams, ReducesPhases) {
    const DeviceParams p(0.5, 0.5, -0.25, 2.0 * kPi + 1.0);
    EXPECT_NEAR(p.theta1(), 2.0 * kPi - 0.25, 1e-15);
    EXPECT_NEAR(p.theta2(), 1.0, 1e-14);
    EXPECT_EQ(DeviceParams(0.5, 0.5, 2.0 * kPi, 0.0).theta1(), 0.0);
}

TEST(DeviceParams, RejectsOutOfRange) {
    EXPECT_THROW(DeviceParams(1.1, 0.5, 0.0, 0.0), DomainError);
    EXPECT_THROW(DeviceParams(0.5, -0.01, 0.0, 0.0), DomainError);
    EXPECT_THROW(DeviceParams(std::nan(""), 0.5, 0.0, 0.0), DomainError);
    EXPECT_THROW(DeviceParams(0.5, 0.5, INFINITY, 0.0), DomainError);
}

TEST(DeviceParams, FlagsDegeneratePoint) {
    EXPECT_TRUE(DeviceParams::tied(1.0, 0.3, 0.0).degenerate());
    EXPECT_FALSE(DeviceParams::tied(0.99, 0.3, 0.0).degenerate());
    EXPECT_FALSE(DeviceParams::tied(1.0, 0.3, 1.0).degenerate());
}

TEST(Coupler2, Examples) {
    const auto full = coupler2(1.0);
    EXPECT_LT((full.matrix() - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff(), 1e-15);

    const auto cross = coupler2(0.0);
    Eigen::Matrix2cd expect;
    expect << 0.0, 1.0, -1.0, 0.0;
    EXPECT_LT((cross.matrix() - expect).cwiseAbs().maxCoeff(), 1e-15);

    const auto half = coupler2(1.0 / std::sqrt(2.0));
    EXPECT_NEAR(half.kappa().real(), 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_EQ(half.kappa().imag(), 0.0);
    EXPECT_LT(unitarity_residual(half.matrix()), 1e-15);
}

TEST(Coupler2, RejectsOutOfRange) {
    EXPECT_THROW(coupler2(-0.1), DomainError);
    EXPECT_THROW(coupler2(1.5), DomainError);
}

TEST(Junction3, Endpoints) {
    Eigen::Matrix3d one = Eigen::Vector3d(1.0, -1.0, 1.0).asDiagonal();
    EXPECT_LT((junction3(1.0).matrix() - one).cwiseAbs().maxCoeff(), 1e-15);

    Eigen::Matrix3d zero;
    zero << 0, 0, -1, 0, 1, 0, -1, 0, 0;
    EXPECT_LT((junction3(0.0).matrix() - zero).cwiseAbs().maxCoeff(), 1e-15);

    const auto half = junction3(0.5);
    EXPECT_EQ(half(1, 1), 0.0);
    EXPECT_NEAR(half.kappa(), std::sqrt(0.5), 1e-15);
    EXPECT_NEAR(half.gamma(), -0.5, 1e-15);
}

TEST(Junction3, OrthogonalOnGrid) {
    for (int i = 0; i <= 1000; ++i) {
        const double t = i / 1000.0;
        EXPECT_NEAR(t * t + 2.0 * t * (1.0 - t) + (t - 1.0) * (t - 1.0), 1.0, 1e-14);
        EXPECT_LT(unitarity_residual(junction3(t).matrix()), 1e-12) << "tau1=" << t;
    }
}

TEST(Junction3, RejectsOutOfRange) {
    EXPECT_THROW(junction3(1.0001), DomainError);
    EXPECT_THROW(junction3(-1e-9), DomainError);
}

TEST(BuildSMatrix, MatchesNetworkOracle) {
    std::mt19937_64 rng(7);
    for (int k = 0; k < 500; ++k) {
        const DeviceParams p = random_params(rng, 0.98);
        const Eigen::Matrix3cd s = build_smatrix(p).matrix();
        EXPECT_LT((s - network_oracle(p)).cwiseAbs().maxCoeff(), 1e-11) << p.describe();
    }
}

TEST(BuildSMatrix, CentralJunctionOpenIsDiagonal) {
    for (double t0 : {0.0, 0.3, 0.52, 0.9}) {
        for (double th : {0.5, kPi, 4.0}) {
            const auto s = build_smatrix(DeviceParams(t0, 1.0, th, th + 0.3)).matrix();
            const auto oracle = network_oracle(DeviceParams(t0, 1.0, th, th + 0.3));
            for (int r = 0; r < 3; ++r) {
                EXPECT_NEAR(std::abs(s(r, r)), 1.0, 1e-12);
                for (int c = 0; c < 3; ++c) {
                    if (r != c) {
                        EXPECT_LT(std::abs(s(r, c)), 1e-12);
                    }
                }
            }
            EXPECT_NEAR(s(1, 1).real(), -1.0, 1e-12);
            EXPECT_LT((s - oracle).cwiseAbs().maxCoeff(), 1e-12);
        }
    }
}

TEST(BuildSMatrix, OuterCouplersOpenDecoupleBusWaveguides) {
    for (double t1 : {0.1, 0.54, 0.9}) {
        for (double th : {0.7, kPi, 5.0}) {
            const auto s = build_smatrix(DeviceParams::tied(1.0, t1, th)).matrix();
            EXPECT_NEAR(std::abs(s(0, 0)), 1.0, 1e-12);
            EXPECT_NEAR(std::abs(s(2, 2)), 1.0, 1e-12);
            for (auto [r, c] : {std::pair{0, 1}, {0, 2}, {1, 0}, {1, 2}, {2, 0}, {2, 1}}) {
                EXPECT_LT(std::abs(s(r, c)), 1e-12);
            }
        }
    }
}

TEST(BuildSMatrix, CaptionPointIsUnitary) {
    const auto s = build_smatrix(DeviceParams::tied(0.52, 0.54, kPi));
    EXPECT_LT(s.unitarity_residual(), 1e-10);
}

TEST(BuildSMatrix, UnitaryOverRandomParameters) {
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    int skipped = 0;
    for (int k = 0; k < 10000; ++k) {
        const DeviceParams p = random_params(rng);
        try {
            worst = std::max(worst, build_smatrix(p).unitarity_residual());
        } catch (const DegenerateDeviceError&) {
            ++skipped;
        }
    }
    EXPECT_LT(worst, 1e-10);
    EXPECT_EQ(skipped, 0);
}

TEST(BuildSMatrix, Continuous) {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> axis(0, 3);
    for (int k = 0; k < 100; ++k) {
        const DeviceParams p = random_params(rng, 0.95);
        const Eigen::Matrix3cd s0 = build_smatrix(p).matrix();
        for (double h : {1e-5, 1e-7}) {
            double v[4] = {p.tau0(), p.tau1(), p.theta1(), p.theta2()};
            const int d = axis(rng);
            v[d] = (d < 2 && v[d] + h > 1.0) ? v[d] - h : v[d] + h;
            const Eigen::Matrix3cd s1 = build_smatrix(DeviceParams(v[0], v[1], v[2], v[3])).matrix();
            EXPECT_LE((s1 - s0).cwiseAbs().maxCoeff(), 1e3 * h) << p.describe();
        }
    }
}

TEST(BuildSMatrix, MirrorSymmetricForTiedPhases) {
    Eigen::Matrix3cd swap = Eigen::Matrix3cd::Zero();
    swap(0, 2) = swap(1, 1) = swap(2, 0) = 1.0;
    std::mt19937_64 rng(5);
    for (int k = 0; k < 200; ++k) {
        DeviceParams r = random_params(rng, 0.99);
        const DeviceParams p = DeviceParams::tied(r.tau0(), r.tau1(), r.theta1());
        const Eigen::Matrix3cd s = build_smatrix(p).matrix();
        EXPECT_LT((swap * s * swap - s).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(BuildSMatrix, ArcSplitOnlyRephases) {
    std::mt19937_64 rng(11);
    for (int k = 0; k < 200; ++k) {
        const DeviceParams p = random_params(rng, 0.99);
        const Eigen::Matrix3cd half = build_smatrix(p).matrix();
        for (double split : {0.0, 0.25, 1.0}) {
            const Eigen::Matrix3cd other = build_smatrix(p, {.arc_split = split}).matrix();
            EXPECT_LT((half.cwiseAbs() - other.cwiseAbs()).cwiseAbs().maxCoeff(), 1e-12);
            // Phase ratios factor as d_out(i) * d_in(j): S' = D1 S D2.
            Eigen::Matrix3cd ratio = other.cwiseQuotient(half);
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) {
                    if (std::abs(half(r, c)) < 1e-6 || std::abs(half(0, 0)) < 1e-6 ||
                        std::abs(half(r, 0)) < 1e-6 || std::abs(half(0, c)) < 1e-6) {
                        continue;
                    }
                    const Complex lhs = ratio(r, c) * ratio(0, 0);
                    const Complex rhs = ratio(r, 0) * ratio(0, c);
                    EXPECT_LT(std::abs(lhs - rhs), 1e-9);
                }
            }
            EXPECT_LT((other - network_oracle(p, split)).cwiseAbs().maxCoeff(), 1e-11);
        }
    }
}

TEST(BuildSMatrix, DegenerateDeviceIsRejected) {
    try {
        build_smatrix(DeviceParams::tied(1.0, 0.4, 0.0));
        FAIL() << "expected DegenerateDeviceError";
    } catch (const DegenerateDeviceError& e) {
        EXPECT_NE(std::string(e.what()).find("tau0=1"), std::string::npos) << e.what();
    }
    EXPECT_THROW(build_smatrix(DeviceParams::tied(1.0, 1.0, 0.0)), DegenerateDeviceError);
    // Ring-to-ring loop resonance: closed double ring with a pi round trip.
    EXPECT_THROW(build_smatrix(DeviceParams::tied(1.0, 0.0, kPi)), DegenerateDeviceError);
    EXPECT_NO_THROW(build_smatrix(DeviceParams::tied(0.999, 0.4, 0.0)));
}

TEST(BuildSMatrix, Deterministic) {
    const DeviceParams p(0.37, 0.61, 2.2, 4.1);
    const auto a = build_smatrix(p).matrix();
    const auto b = build_smatrix(p).matrix();
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            EXPECT_EQ(a(r, c).real(), b(r, c).real());
            EXPECT_EQ(a(r, c).imag(), b(r, c).imag());
        }
    }
}
