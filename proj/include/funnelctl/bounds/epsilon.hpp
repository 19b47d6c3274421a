#pragma once

#include <cmath>
#include <vector>

#include "funnelctl/funnel/funnel_function.hpp"
#include "funnelctl/ode/rk45.hpp"

namespace funnelctl::bounds {

/// Solution of the margin equation
///   eps' = psi_i' - psi_{i+1} + psi_i (psi_i - eps) / (2 eps),
///   eps(0) = psi_i(0) - ||e_i(0)||,
/// together with its guaranteed envelope constants.
struct EpsilonProfile {
    Index level = 0;
    std::vector<double> t;
    std::vector<double> eps;
    double e_i0_norm = 0.0;
    double lambda_i = 0.0;    // inf psi_i
    double lambda_ip1 = 0.0;  // inf psi_{i+1}
    double kappa_i = 0.0;     // sup |psi_{i+1} - psi_i'|
    double sup_psi_i = 0.0;
    double eps_min = 0.0;
    double eps_max = 0.0;
};

namespace detail {

// dense-grid essential supremum plus the analytic tail of the funnel family
inline double kappa_sup(const funnel::FunnelFunction& fi, const funnel::FunnelFunction& fip1,
                        double horizon, Index pts = 10000) {
    double worst = std::abs(fip1.inf_psi());  // tail: psi_{i+1} -> c, psi_i' -> 0
    for (Index g = 0; g <= pts; ++g) {
        double t = horizon * static_cast<double>(g) / static_cast<double>(pts);
        worst = std::max(worst, std::abs(fip1.psi(t) - fi.psi(t, 1)));
    }
    return worst;
}

}  // namespace detail

/// Integrate the margin equation for level i on the given grid and assert the
/// envelope eps_min <= eps(t) <= psi_i(t) - eps_max (slack tolerance 1e-9).
inline EpsilonProfile integrate_epsilon(const funnel::FunnelSpec& spec, Index i,
                                        double e_i0_norm, const std::vector<double>& grid,
                                        ode::OdeOptions opts = {}) {
    if (i + 1 >= spec.rho())
        throw NumericalError("integrate_epsilon: level must have a successor funnel");
    const auto& fi = spec.level(i);
    const auto& fip1 = spec.level(i + 1);
    if (!(e_i0_norm >= 0.0) || !(e_i0_norm < fi.psi(0.0)))
        throw NumericalError("integrate_epsilon: initial error outside the funnel");

    EpsilonProfile prof;
    prof.level = i;
    prof.e_i0_norm = e_i0_norm;
    prof.lambda_i = fi.inf_psi();
    prof.lambda_ip1 = fip1.inf_psi();
    prof.sup_psi_i = fi.sup_psi();
    prof.kappa_i = detail::kappa_sup(fi, fip1, grid.back());
    double eps0 = fi.psi(0.0) - e_i0_norm;
    prof.eps_min = std::min(prof.lambda_i * prof.lambda_i / (2.0 * prof.kappa_i + prof.sup_psi_i),
                            eps0);
    prof.eps_max =
        std::min({prof.lambda_ip1 * prof.lambda_i / prof.sup_psi_i, prof.lambda_i / 2.0,
                  e_i0_norm});

    auto rhs = [&](double t, const Vector& y) -> Vector {
        double eps = y(0);
        Vector dy(1);
        dy(0) = fi.psi(t, 1) - fip1.psi(t) + fi.psi(t) * (fi.psi(t) - eps) / (2.0 * eps);
        return dy;
    };
    Vector y0(1);
    y0(0) = eps0;
    ode::integrate_grid(rhs, grid, y0, opts, [&](double t, const Vector& y) {
        prof.t.push_back(t);
        prof.eps.push_back(y(0));
    });

    for (size_t g = 0; g < prof.t.size(); ++g) {
        double lo = prof.eps_min - 1e-9;
        double hi = fi.psi(prof.t[g]) - prof.eps_max + 1e-9;
        if (prof.eps[g] < lo || prof.eps[g] > hi)
            throw NumericalError("integrate_epsilon: envelope violated at t=" +
                                 std::to_string(prof.t[g]) +
                                 " (integration accuracy problem)");
    }
    return prof;
}

/// Improved margin audit: ||e_i(t)|| <= psi_i(t) - eps_i(t) on the shared grid.
template <typename Traj>
Certificate improved_margin_audit(const Traj& traj, const std::vector<EpsilonProfile>& profiles,
                                  double tol = 1e-7) {
    Certificate cert;
    cert.name = "improved-margin";
    cert.pass = true;
    double min_slack = std::numeric_limits<double>::infinity();
    for (const auto& prof : profiles) {
        const auto& e_level = traj.e_levels[static_cast<size_t>(prof.level)];
        if (e_level.size() != prof.eps.size())
            throw NumericalError("improved_margin_audit: grid mismatch");
        for (size_t g = 0; g < prof.eps.size(); ++g) {
            double psi = traj.psi[static_cast<size_t>(prof.level)][g];
            double slack = psi - prof.eps[g] - e_level[g].norm();
            min_slack = std::min(min_slack, slack);
            if (slack < -tol) cert.pass = false;
        }
    }
    cert.metrics["min_slack"] = min_slack;
    if (!cert.pass) cert.detail = "recorded error exceeds the guaranteed margin";
    return cert;
}

}  // namespace funnelctl::bounds
