#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "noonforge/device.hpp"
#include "noonforge/errors.hpp"
#include "noonforge/fock.hpp"

namespace noonforge {

/// Click probabilities below this are treated as "herald never fires": the
/// conditional state is left empty and the NOON fidelity is undefined.
inline constexpr double kClickFloor = 1e-14;

/// Exact number-resolving detection of `count` photons on `mode`.
struct HeraldSpec {
    int mode = kModeB;
    int count = 0;
};

struct HeraldProjection {
    double p_click = 0.0;
    /// Remaining modes in their original order with the herald mode removed.
    FockVector conditional;
};

struct HeraldReport {
    double p_click = 0.0;
    FockVector conditional{0, 2};
    /// Empty when the herald cannot fire.
    std::optional<double> f_noon;
    int n_target = 0;
    DeviceParams params;
};

inline HeraldProjection project_herald(const FockVector& out, const HeraldSpec& h) {
    if (std::abs(out.norm2() - 1.0) > 1e-10) {
        throw DomainError("herald projection expects a normalized state");
    }
    if (out.modes() < 2) throw DomainError("herald needs at least two modes");
    if (h.mode < 0 || h.mode >= out.modes()) throw DomainError("herald mode out of range");
    if (h.count < 0 || h.count > out.photons()) {
        throw DomainError("herald count " + std::to_string(h.count) +
                          " exceeds sector photon number " + std::to_string(out.photons()));
    }

    const int rest_n = out.photons() - h.count;
    const int rest_modes = out.modes() - 1;
    Eigen::VectorXcd cond =
        Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(detail::sector_size(rest_n, rest_modes)));

    const auto basis = out.basis();
    std::vector<int> reduced(static_cast<std::size_t>(rest_modes));
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const auto& occ = basis[i].occupations();
        if (occ[static_cast<std::size_t>(h.mode)] != h.count) continue;
        std::size_t k = 0;
        for (int m = 0; m < out.modes(); ++m) {
            if (m != h.mode) reduced[k++] = occ[static_cast<std::size_t>(m)];
        }
        cond(static_cast<Eigen::Index>(basis_index(FockState(reduced)))) =
            out.amplitudes()(static_cast<Eigen::Index>(i));
    }

    const double p = cond.squaredNorm();
    if (p < kClickFloor) {
        cond.setZero();
    } else {
        cond /= std::sqrt(p);
    }
    return {std::min(p, 1.0), FockVector(rest_n, rest_modes, std::move(cond))};
}

/// Overlap with (|N,0> + e^{i phi}|0,N>)/sqrt(2), maximized over phi.
inline double noon_fidelity(const FockVector& conditional, int n) {
    if (n < 1) throw DomainError("NOON order must be at least 1");
    if (conditional.modes() != 2) throw DomainError("NOON fidelity needs a two-mode state");
    if (conditional.photons() != n) {
        throw DomainError("conditional state has " + std::to_string(conditional.photons()) +
                          " photons, NOON order is " + std::to_string(n));
    }
    const double s = std::abs(conditional.amplitude({n, 0})) +
                     std::abs(conditional.amplitude({0, n}));
    return std::clamp(0.5 * s * s, 0.0, 1.0);
}

/// build_smatrix -> evolve -> project_herald -> noon_fidelity.
inline HeraldReport run_experiment(const DeviceParams& p, const FockState& input,
                                   const HeraldSpec& h, int n_target,
                                   int max_photons = kDefaultMaxPhotons,
                                   const BuildOptions& build = {}) {
    if (input.modes() != 3) throw DomainError("device input must have three modes");
    if (n_target < 0) throw DomainError("NOON order must be non-negative");
    if (h.count > input.total()) {
        throw DomainError("herald count exceeds input photon number");
    }
    if (n_target != input.total() - h.count && n_target != 0) {
        throw DomainError("NOON order " + std::to_string(n_target) +
                          " does not match the heralded sector (" +
                          std::to_string(input.total() - h.count) + " photons)");
    }

    const ScatteringMatrix s = build_smatrix(p, build);
    const FockVector out = evolve(s, input, max_photons);
    HeraldProjection proj = project_herald(out, h);

    HeraldReport r;
    r.p_click = proj.p_click;
    r.n_target = n_target;
    r.params = p;
    if (n_target > 0 && proj.p_click >= kClickFloor) {
        r.f_noon = noon_fidelity(proj.conditional, n_target);
    }
    r.conditional = std::move(proj.conditional);
    return r;
}

}  // namespace noonforge
