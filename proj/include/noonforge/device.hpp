#pragma once

// Scattering matrix of the double-ring, triple-waveguide device.
//
// Layout (mode order a, b, c everywhere):
//
//     a  ===========[U2]===========   outer coupler, ring 1 above it
//                    ( ring 1 )
//     b  ===========[U3]===========   central 3-port junction touching both rings
//                    ( ring 2 )
//     c  ===========[U2]===========   outer coupler, ring 2 below it
//
// Each ring meets two junctions, so it is split into two arcs. The arc leaving
// the outer coupler carries the field s_j and the arc leaving the central
// junction carries u_j. With a round-trip phase theta_j and an arc split
// fraction f (default 1/2) the arcs impart e^{i f theta_j} and
// e^{i (1-f) theta_j}. The boundary conditions are
//
//     (a_out, s1)     = U2(tau0) (a_in, u1 e^{i(1-f)theta1})
//     (u1, b_out, u2) = U3(tau1) (s1 e^{i f theta1}, b_in, s2 e^{i f theta2})
//     (c_out, s2)     = U2(tau0) (c_in, u2 e^{i(1-f)theta2})
//
// The four internal amplitudes (s1, u1, s2, u2) are solved for each unit input
// and substituted back to give S. The split fraction is a gauge: it only
// rephases rows and columns of S.
//
// Central junction. The general symmetric lossless 3-port is
//
//     [[tau_1,            k' e^{i eta12}, G e^{i eta13}],
//      [k' e^{i eta21},   T,              k' e^{i eta23}],
//      [G e^{i eta31},    k' e^{i eta32}, tau_2        ]]
//
// Unitarity eliminates k' and G and forces eta12 + eta23 + eta31 = pi (mod 2pi)
// for orthogonal columns. Taking tau_1 = tau_2 leaves the one-parameter real
// orthogonal matrix built by junction3(). Only that reduced form exists at
// runtime.

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "noonforge/errors.hpp"

namespace noonforge {

using Complex = std::complex<double>;

/// Mode indices. Rows of S are outputs, columns are inputs.
enum Mode : int { kModeA = 0, kModeB = 1, kModeC = 2 };

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Reduces a phase to [0, 2pi).
inline double reduce_phase(double theta) {
    if (!std::isfinite(theta)) {
        throw DomainError("phase must be finite");
    }
    double r = std::fmod(theta, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    if (r >= kTwoPi) r = 0.0;
    return r;
}

/// Tunable parameters: coupler transmissions and ring round-trip phases.
class DeviceParams {
public:
    DeviceParams() : DeviceParams(1.0, 1.0, std::numbers::pi, std::numbers::pi) {}

    DeviceParams(double tau0, double tau1, double theta1, double theta2)
        : tau0_(check_tau(tau0, "tau0")),
          tau1_(check_tau(tau1, "tau1")),
          theta1_(reduce_phase(theta1)),
          theta2_(reduce_phase(theta2)) {}

    /// Both rings share one phase.
    static DeviceParams tied(double tau0, double tau1, double theta) {
        return {tau0, tau1, theta, theta};
    }

    double tau0() const { return tau0_; }
    double tau1() const { return tau1_; }
    double theta1() const { return theta1_; }
    double theta2() const { return theta2_; }

    /// Fully transmitting outer couplers with a resonant ring: the closed ring
    /// has no unique steady state.
    bool degenerate() const { return tau0_ == 1.0 && (theta1_ == 0.0 || theta2_ == 0.0); }

    std::string describe() const {
        std::ostringstream os;
        os.precision(17);
        os << "tau0=" << tau0_ << ", tau1=" << tau1_ << ", theta1=" << theta1_
           << ", theta2=" << theta2_;
        return os.str();
    }

    friend bool operator==(const DeviceParams&, const DeviceParams&) = default;

private:
    static double check_tau(double tau, const char* name) {
        if (!(tau >= 0.0 && tau <= 1.0)) {
            throw DomainError(std::string(name) + " must lie in [0, 1]");
        }
        return tau;
    }

    double tau0_;
    double tau1_;
    double theta1_;
    double theta2_;
};

/// Lossless directional coupler [[tau, kappa], [-kappa*, tau]].
class JunctionMatrix2 {
public:
    explicit JunctionMatrix2(double tau, Complex kappa) : tau_(tau), kappa_(kappa) {
        m_ << tau, kappa, -std::conj(kappa), tau;
    }

    double tau() const { return tau_; }
    Complex kappa() const { return kappa_; }
    const Eigen::Matrix2cd& matrix() const { return m_; }
    Complex operator()(int row, int col) const { return m_(row, col); }

private:
    double tau_;
    Complex kappa_;
    Eigen::Matrix2cd m_;
};

/// Real orthogonal central junction, parametrized by tau1.
class JunctionMatrix3 {
public:
    explicit JunctionMatrix3(double tau1) : tau1_(tau1) {
        const double k = std::sqrt(2.0 * tau1 * (1.0 - tau1));
        m_ << tau1, -k, tau1 - 1.0,
              -k, 1.0 - 2.0 * tau1, -k,
              tau1 - 1.0, -k, tau1;
    }

    double tau1() const { return tau1_; }
    /// Waveguide-ring coupling magnitude sqrt(2 tau1 (1 - tau1)).
    double kappa() const { return std::abs(m_(0, 1)); }
    /// Ring-to-ring amplitude tau1 - 1.
    double gamma() const { return m_(0, 2); }
    const Eigen::Matrix3d& matrix() const { return m_; }
    double operator()(int row, int col) const { return m_(row, col); }

private:
    double tau1_;
    Eigen::Matrix3d m_;
};

inline JunctionMatrix2 coupler2(double tau0) {
    if (!(tau0 >= 0.0 && tau0 <= 1.0)) {
        throw DomainError("coupler transmission must lie in [0, 1]");
    }
    return JunctionMatrix2(tau0, Complex(std::sqrt(1.0 - tau0 * tau0), 0.0));
}

inline JunctionMatrix3 junction3(double tau1) {
    if (!(tau1 >= 0.0 && tau1 <= 1.0)) {
        throw DomainError("central junction tau1 must lie in [0, 1]");
    }
    return JunctionMatrix3(tau1);
}

/// max |M^dagger M - I|.
template <typename Derived>
double unitarity_residual(const Eigen::MatrixBase<Derived>& m) {
    using Scalar = typename Derived::Scalar;
    const auto n = m.cols();
    auto g = (m.adjoint() * m).eval();
    g -= Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Identity(n, n);
    return g.cwiseAbs().maxCoeff();
}

/// 3x3 single-photon transfer matrix together with the parameters it came from.
class ScatteringMatrix {
public:
    ScatteringMatrix(const Eigen::Matrix3cd& entries, const DeviceParams& params)
        : entries_(entries), params_(params) {}

    const Eigen::Matrix3cd& matrix() const { return entries_; }
    const DeviceParams& params() const { return params_; }
    Complex operator()(int out, int in) const { return entries_(out, in); }
    double unitarity_residual() const { return noonforge::unitarity_residual(entries_); }

private:
    Eigen::Matrix3cd entries_;
    DeviceParams params_;
};

struct BuildOptions {
    /// Fraction of each round-trip phase on the arc leaving the outer coupler.
    double arc_split = 0.5;
    /// Largest accepted 2-norm condition number of the internal system.
    double max_condition = 1e12;
};

/// Solves the ring boundary conditions for S(tau0, tau1, theta1, theta2).
inline ScatteringMatrix build_smatrix(const DeviceParams& p, const BuildOptions& opts = {}) {
    if (!(opts.arc_split >= 0.0 && opts.arc_split <= 1.0)) {
        throw DomainError("arc split fraction must lie in [0, 1]");
    }
    const JunctionMatrix2 outer = coupler2(p.tau0());
    const JunctionMatrix3 center = junction3(p.tau1());

    const Complex i1(0.0, 1.0);
    // f*: outer -> central arc, g*: central -> outer arc.
    const Complex f1 = std::exp(i1 * (opts.arc_split * p.theta1()));
    const Complex g1 = std::exp(i1 * ((1.0 - opts.arc_split) * p.theta1()));
    const Complex f2 = std::exp(i1 * (opts.arc_split * p.theta2()));
    const Complex g2 = std::exp(i1 * ((1.0 - opts.arc_split) * p.theta2()));

    // Unknowns x = (s1, u1, s2, u2); one column of rhs per unit input (a, b, c).
    Eigen::Matrix4cd sys = Eigen::Matrix4cd::Zero();
    Eigen::Matrix<Complex, 4, 3> rhs = Eigen::Matrix<Complex, 4, 3>::Zero();

    sys(0, 0) = 1.0;
    sys(0, 1) = -outer(1, 1) * g1;
    rhs(0, kModeA) = outer(1, 0);

    sys(1, 0) = -center(0, 0) * f1;
    sys(1, 1) = 1.0;
    sys(1, 2) = -center(0, 2) * f2;
    rhs(1, kModeB) = center(0, 1);

    sys(2, 0) = -center(2, 0) * f1;
    sys(2, 2) = -center(2, 2) * f2;
    sys(2, 3) = 1.0;
    rhs(2, kModeB) = center(2, 1);

    sys(3, 2) = 1.0;
    sys(3, 3) = -outer(1, 1) * g2;
    rhs(3, kModeC) = outer(1, 0);

    const Eigen::JacobiSVD<Eigen::Matrix4cd> svd(sys);
    const auto& sv = svd.singularValues();
    const double smin = sv(3);
    const double cond = smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
    if (!(cond <= opts.max_condition)) {
        std::ostringstream os;
        os << "degenerate device (" << p.describe() << "): ring system condition number "
           << cond << " exceeds " << opts.max_condition;
        throw DegenerateDeviceError(os.str());
    }

    const Eigen::Matrix<Complex, 4, 3> x = sys.fullPivLu().solve(rhs);
    const auto s1 = x.row(0);
    const auto u1 = x.row(1);
    const auto s2 = x.row(2);
    const auto u2 = x.row(3);

    Eigen::Matrix3cd s;
    const Eigen::RowVector3cd ea(1.0, 0.0, 0.0);
    const Eigen::RowVector3cd eb(0.0, 1.0, 0.0);
    const Eigen::RowVector3cd ec(0.0, 0.0, 1.0);
    s.row(kModeA) = outer(0, 0) * ea + outer(0, 1) * g1 * u1;
    s.row(kModeB) = center(1, 0) * f1 * s1 + center(1, 1) * eb + center(1, 2) * f2 * s2;
    s.row(kModeC) = outer(0, 0) * ec + outer(0, 1) * g2 * u2;
    return ScatteringMatrix(s, p);
}

}  // namespace noonforge
