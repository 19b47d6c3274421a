#pragma once

#include <algorithm>

#include "funnelctl/ode/rk45.hpp"
#include "funnelctl/redef/split.hpp"
#include "funnelctl/refgen/reference.hpp"

namespace funnelctl::redef {

/// Boundedness of the axis-band response z3' = Q3 z3 + P3 y_ref, z3(0) = 0.
/// Trivial when k3 = 0. For exosystem references with spectra separated from
/// sigma(Q3) the bounded particular solution settles it; otherwise the
/// response is integrated over the horizon and tested for growth (this is a
/// horizon-limited substitute for a property that is undecidable in general).
inline Certificate check_reference_boundedness(const SpectralSplit& split,
                                               const refgen::ReferenceSignal& y_ref,
                                               double horizon = 20.0, Index grid_points = 2001,
                                               const Tolerances& tol = {}) {
    Certificate cert;
    cert.name = "bounded-critical-response";
    if (split.k3 == 0) {
        cert.pass = true;
        cert.detail = "no axis-band part";
        return cert;
    }

    if (y_ref.kind == refgen::ReferenceKind::exosystem && y_ref.exo) {
        auto q3_eigs = numlin::eigenvalues_of(split.q3);
        auto exo_eigs = numlin::eigenvalues_of(y_ref.exo->a_e);
        double sep = std::numeric_limits<double>::infinity();
        for (const auto& a : q3_eigs)
            for (const auto& b : exo_eigs) sep = std::min(sep, std::abs(a - b));
        double band = tol.axis * std::max({1.0, split.q3.norm(), y_ref.exo->a_e.norm()});
        if (sep > 1e3 * band) {
            double etn = 0.0;
            for (int i = 0; i <= 100; ++i)
                etn = std::max(etn, numlin::expm(split.q3, horizon * i / 100.0).norm());
            cert.metrics["spectral_separation"] = sep;
            cert.metrics["max_transition_norm"] = etn;
            if (etn < 1e3) {
                cert.pass = true;
                cert.detail = "exosystem spectra separated from the axis band; particular solution bounded";
                return cert;
            }
        }
    }

    auto grid = ode::uniform_grid(0.0, horizon, grid_points);
    double m1 = 0.0, m2 = 0.0, overall = 0.0;
    ode::integrate_grid(
        [&](double t, const Vector& z) -> Vector { return split.q3 * z + split.p3 * y_ref(t, 0); },
        grid, Vector::Zero(split.k3), ode::OdeOptions{}, [&](double t, const Vector& z) {
            double zn = z.norm();
            overall = std::max(overall, zn);
            (t <= horizon / 2.0 ? m1 : m2) = std::max(t <= horizon / 2.0 ? m1 : m2, zn);
        });
    cert.metrics["max_norm"] = overall;
    cert.metrics["first_half_max"] = m1;
    cert.metrics["second_half_max"] = m2;
    cert.pass = (m2 <= 1.25 * m1 + 1e-9 * std::max(1.0, m1)) && overall < 1e6;
    if (!cert.pass)
        cert.detail = "axis-band response grows over the horizon (resonant reference)";
    return cert;
}

/// The isolated block must be disturbance-free: [0 I] T d_eta(t) = 0 on a
/// sampled grid. Also reports the reconstructed input-channel disturbance
/// delta = Gamma K Qtilde^{ell-1} d_eta2 as a diagnostic.
inline Certificate check_disturbance_decoupling(const UnstableIsolation& iso,
                                                const std::function<Vector(double)>& d_eta,
                                                const Matrix& gamma, const Matrix& k_row,
                                                double horizon = 10.0, Index grid_points = 201,
                                                const Tolerances& tol = {}) {
    Certificate cert;
    cert.name = "unstable-disturbance-free";
    const Index lm = iso.ell * iso.m;
    if (lm == 0 || !d_eta) {
        cert.pass = true;
        return cert;
    }
    Matrix kq = k_row;
    for (Index j = 0; j + 1 < iso.ell; ++j) kq = kq * iso.q_tilde;
    double worst = 0.0, worst_delta = 0.0;
    for (Index i = 0; i < grid_points; ++i) {
        double t = horizon * static_cast<double>(i) / static_cast<double>(grid_points - 1);
        Vector d2 = iso.t_transform.bottomRows(lm) * d_eta(t);
        worst = std::max(worst, d2.norm());
        worst_delta = std::max(worst_delta, (gamma * (kq * d2)).norm());
    }
    cert.metrics["max_residual"] = worst;
    cert.metrics["max_delta"] = worst_delta;
    cert.pass = worst <= tol.zero * std::max(1.0, iso.t_transform.norm());
    if (!cert.pass)
        cert.detail = "disturbance drives the isolated internal block (delta != 0)";
    return cert;
}

}  // namespace funnelctl::redef
