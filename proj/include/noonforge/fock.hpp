#pragma once

// Fixed-photon-number Fock sectors and the lift of a single-photon transfer
// matrix to them via permanents.
//
// Basis order (part of the public contract, version 1): compositions of n into
// `modes` parts in reverse-lexicographic order, so for n = 2, modes = 3
//
//     (2,0,0) (1,1,0) (1,0,1) (0,2,0) (0,1,1) (0,0,2)

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "noonforge/device.hpp"
#include "noonforge/errors.hpp"

namespace noonforge {

inline constexpr int kDefaultMaxPhotons = 12;
inline constexpr int kFockBasisVersion = 1;

/// Occupation numbers, one per mode.
class FockState {
public:
    FockState() = default;
    FockState(std::initializer_list<int> occ) : FockState(std::vector<int>(occ)) {}
    explicit FockState(std::vector<int> occ) : occ_(std::move(occ)) {
        if (occ_.empty()) throw DomainError("Fock state needs at least one mode");
        for (int k : occ_) {
            if (k < 0) throw DomainError("occupation numbers must be non-negative");
        }
    }

    int modes() const { return static_cast<int>(occ_.size()); }
    int total() const {
        int n = 0;
        for (int k : occ_) n += k;
        return n;
    }
    int operator[](int mode) const { return occ_.at(static_cast<std::size_t>(mode)); }
    const std::vector<int>& occupations() const { return occ_; }

    std::string str() const {
        std::string s = "|";
        for (std::size_t i = 0; i < occ_.size(); ++i) {
            if (i) s += ',';
            s += std::to_string(occ_[i]);
        }
        return s + ">";
    }

    friend bool operator==(const FockState&, const FockState&) = default;

private:
    std::vector<int> occ_;
};

namespace detail {

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return std::round(r);
}

/// Number of compositions of n into m non-negative parts.
inline std::size_t sector_size(int n, int m) {
    return static_cast<std::size_t>(binomial(n + m - 1, m - 1));
}

inline double factorial(int n) {
    double r = 1.0;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

inline void compositions(int remaining, int mode, std::vector<int>& cur,
                         std::vector<FockState>& out) {
    const int modes = static_cast<int>(cur.size());
    if (mode == modes - 1) {
        cur[mode] = remaining;
        out.emplace_back(cur);
        return;
    }
    for (int k = remaining; k >= 0; --k) {
        cur[mode] = k;
        compositions(remaining - k, mode + 1, cur, out);
    }
}

inline void check_capacity(int n, int max_photons) {
    if (n > max_photons) {
        throw CapacityError("photon number " + std::to_string(n) + " exceeds cap " +
                            std::to_string(max_photons));
    }
}

}  // namespace detail

/// All occupation patterns with total n over `modes` modes, reverse-lexicographic.
inline std::vector<FockState> enumerate_basis(int n, int modes = 3,
                                              int max_photons = kDefaultMaxPhotons) {
    if (n < 0) throw DomainError("photon number must be non-negative");
    if (modes < 1) throw DomainError("mode count must be positive");
    detail::check_capacity(n, max_photons);
    std::vector<FockState> out;
    out.reserve(detail::sector_size(n, modes));
    std::vector<int> cur(static_cast<std::size_t>(modes), 0);
    detail::compositions(n, 0, cur, out);
    return out;
}

/// Position of `s` within enumerate_basis(s.total(), s.modes()).
inline std::size_t basis_index(const FockState& s) {
    const int m = s.modes();
    int remaining = s.total();
    std::size_t idx = 0;
    for (int i = 0; i + 1 < m; ++i) {
        // Patterns that put more photons in mode i come first.
        for (int k = remaining; k > s[i]; --k) {
            idx += detail::sector_size(remaining - k, m - i - 1);
        }
        remaining -= s[i];
    }
    return idx;
}

/// Dense amplitude vector over one fixed-photon-number sector.
class FockVector {
public:
    FockVector(int n, int modes)
        : n_(n), modes_(modes), amps_(Eigen::VectorXcd::Zero(
                                    static_cast<Eigen::Index>(detail::sector_size(n, modes)))) {
        if (n < 0 || modes < 1) throw DomainError("invalid Fock sector");
    }

    FockVector(int n, int modes, Eigen::VectorXcd amplitudes)
        : n_(n), modes_(modes), amps_(std::move(amplitudes)) {
        if (n < 0 || modes < 1) throw DomainError("invalid Fock sector");
        if (static_cast<std::size_t>(amps_.size()) != detail::sector_size(n, modes)) {
            throw DomainError("amplitude count does not match sector size");
        }
        if (norm2() > 1.0 + 1e-10) throw DomainError("Fock vector norm exceeds 1");
    }

    /// Unit amplitude on a single basis state.
    static FockVector basis_state(const FockState& s) {
        FockVector v(s.total(), s.modes());
        v.amps_(static_cast<Eigen::Index>(basis_index(s))) = 1.0;
        return v;
    }

    int photons() const { return n_; }
    int modes() const { return modes_; }
    std::size_t size() const { return static_cast<std::size_t>(amps_.size()); }
    const Eigen::VectorXcd& amplitudes() const { return amps_; }
    std::vector<FockState> basis() const { return enumerate_basis(n_, modes_, n_); }

    Complex amplitude(const FockState& s) const {
        if (s.modes() != modes_ || s.total() != n_) return {0.0, 0.0};
        return amps_(static_cast<Eigen::Index>(basis_index(s)));
    }

    double norm2() const { return amps_.squaredNorm(); }

private:
    int n_;
    int modes_;
    Eigen::VectorXcd amps_;
};

/// Scratch space for Ryser's formula. One per worker.
class PermanentWorkspace {
public:
    explicit PermanentWorkspace(int max_size = kDefaultMaxPhotons) { reserve(max_size); }

    void reserve(int size) {
        const auto n = static_cast<std::size_t>(std::max(size, 0));
        if (row_sums_.size() < n) row_sums_.resize(n);
    }

    std::vector<Complex>& row_sums() { return row_sums_; }

private:
    std::vector<Complex> row_sums_;
};

/// Permanent via Ryser's formula, subsets visited in Gray-code order.
template <typename Derived>
Complex permanent(const Eigen::MatrixBase<Derived>& m, PermanentWorkspace& ws,
                  int max_size = kDefaultMaxPhotons) {
    if (m.rows() != m.cols()) throw DomainError("permanent requires a square matrix");
    const int n = static_cast<int>(m.rows());
    if (n > max_size || n >= 63) {
        throw CapacityError("permanent size " + std::to_string(n) + " exceeds cap " +
                            std::to_string(max_size));
    }
    if (n == 0) return {1.0, 0.0};

    ws.reserve(n);
    auto& rs = ws.row_sums();
    std::fill(rs.begin(), rs.begin() + n, Complex(0.0, 0.0));

    // sum over non-empty column subsets S of (-1)^|S| prod_i sum_{j in S} m_ij
    Complex total(0.0, 0.0);
    std::uint64_t gray = 0;
    const std::uint64_t steps = std::uint64_t{1} << n;
    for (std::uint64_t k = 1; k < steps; ++k) {
        const int j = std::countr_zero(k);
        const std::uint64_t bit = std::uint64_t{1} << j;
        gray ^= bit;
        if (gray & bit) {
            for (int i = 0; i < n; ++i) rs[i] += Complex(m(i, j));
        } else {
            for (int i = 0; i < n; ++i) rs[i] -= Complex(m(i, j));
        }
        Complex prod = rs[0];
        for (int i = 1; i < n; ++i) prod *= rs[i];
        total += (std::popcount(gray) & 1) ? -prod : prod;
    }
    return (n & 1) ? -total : total;
}

template <typename Derived>
Complex permanent(const Eigen::MatrixBase<Derived>& m, int max_size = kDefaultMaxPhotons) {
    PermanentWorkspace ws(static_cast<int>(m.rows()));
    return permanent(m, ws, max_size);
}

namespace detail {

/// Mode index repeated occ[i] times, e.g. (1,2,0) -> [0,1,1].
inline std::vector<int> expand_modes(const FockState& s) {
    std::vector<int> idx;
    idx.reserve(static_cast<std::size_t>(s.total()));
    for (int i = 0; i < s.modes(); ++i) {
        for (int k = 0; k < s[i]; ++k) idx.push_back(i);
    }
    return idx;
}

inline double occupation_factorials(const FockState& s) {
    double r = 1.0;
    for (int k : s.occupations()) r *= factorial(k);
    return r;
}

inline Complex transition_amplitude(const Eigen::MatrixXcd& u, const std::vector<int>& rows,
                                    const std::vector<int>& cols, double norm,
                                    Eigen::MatrixXcd& sub, PermanentWorkspace& ws,
                                    int max_photons) {
    const auto k = static_cast<Eigen::Index>(rows.size());
    sub.resize(k, k);
    for (Eigen::Index r = 0; r < k; ++r) {
        for (Eigen::Index c = 0; c < k; ++c) sub(r, c) = u(rows[r], cols[c]);
    }
    return permanent(sub, ws, max_photons) / norm;
}

}  // namespace detail

/// <m| U(S) |input> for every m in the input's sector.
inline FockVector evolve(const Eigen::MatrixXcd& s, const FockState& input,
                         int max_photons = kDefaultMaxPhotons) {
    if (s.rows() != s.cols()) throw DomainError("transfer matrix must be square");
    if (s.rows() != input.modes()) throw DomainError("input mode count does not match matrix");
    const int n = input.total();
    detail::check_capacity(n, max_photons);

    const auto basis = enumerate_basis(n, input.modes(), max_photons);
    const auto cols = detail::expand_modes(input);
    const double in_fact = detail::occupation_factorials(input);

    PermanentWorkspace ws(n);
    Eigen::MatrixXcd sub;
    Eigen::VectorXcd amps(static_cast<Eigen::Index>(basis.size()));
    for (std::size_t r = 0; r < basis.size(); ++r) {
        const double norm = std::sqrt(in_fact * detail::occupation_factorials(basis[r]));
        amps(static_cast<Eigen::Index>(r)) = detail::transition_amplitude(
            s, detail::expand_modes(basis[r]), cols, norm, sub, ws, max_photons);
    }
    return FockVector(n, input.modes(), std::move(amps));
}

inline FockVector evolve(const ScatteringMatrix& s, const FockState& input,
                         int max_photons = kDefaultMaxPhotons) {
    return evolve(Eigen::MatrixXcd(s.matrix()), input, max_photons);
}

/// Full sector matrix: entry (r, c) = <basis[r]| U(S) |basis[c]>.
inline Eigen::MatrixXcd evolve_all(const Eigen::MatrixXcd& s, int n,
                                   int max_photons = kDefaultMaxPhotons) {
    if (s.rows() != s.cols()) throw DomainError("transfer matrix must be square");
    const int modes = static_cast<int>(s.rows());
    const auto basis = enumerate_basis(n, modes, max_photons);
    const auto dim = static_cast<Eigen::Index>(basis.size());

    std::vector<std::vector<int>> expanded;
    std::vector<double> facts;
    expanded.reserve(basis.size());
    for (const auto& b : basis) {
        expanded.push_back(detail::expand_modes(b));
        facts.push_back(detail::occupation_factorials(b));
    }

    PermanentWorkspace ws(n);
    Eigen::MatrixXcd sub;
    Eigen::MatrixXcd out(dim, dim);
    for (Eigen::Index r = 0; r < dim; ++r) {
        for (Eigen::Index c = 0; c < dim; ++c) {
            out(r, c) = detail::transition_amplitude(s, expanded[r], expanded[c],
                                                     std::sqrt(facts[r] * facts[c]), sub, ws,
                                                     max_photons);
        }
    }
    return out;
}

inline Eigen::MatrixXcd evolve_all(const ScatteringMatrix& s, int n,
                                   int max_photons = kDefaultMaxPhotons) {
    return evolve_all(Eigen::MatrixXcd(s.matrix()), n, max_photons);
}

}  // namespace noonforge
