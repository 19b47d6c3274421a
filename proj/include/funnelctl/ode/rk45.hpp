#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "funnelctl/core.hpp"

namespace funnelctl::ode {

struct OdeOptions {
    double rtol = 1e-8;
    double atol = 1e-7;
    double h_init = 0.0;  // 0: derive from the first interval
    double h_max = std::numeric_limits<double>::infinity();
    int max_halvings = 40;       // consecutive guard rejections before giving up
    long long max_steps = 20000000;
};

namespace detail {

// Dormand-Prince 5(4) tableau
constexpr double A21 = 1.0 / 5;
constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561,
                 A54 = -212.0 / 729;
constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176,
                 A65 = -5103.0 / 18656;
constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784,
                 B6 = 11.0 / 84;
constexpr double E1 = 35.0 / 384 - 5179.0 / 57600, E3 = 500.0 / 1113 - 7571.0 / 16695,
                 E4 = 125.0 / 192 - 393.0 / 640, E5 = -2187.0 / 6784 + 92097.0 / 339200,
                 E6 = 11.0 / 84 - 187.0 / 2100, E7 = -1.0 / 40;
constexpr double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9;

}  // namespace detail

/// Adaptive embedded RK5(4) integration from t0 to t1. The right-hand side
/// may throw FunnelBoundaryReached from any stage evaluation; the step is then
/// halved (the closed loop is integrated up to, never across, the boundary).
/// `observer(t, y)` is called at t0 and after every accepted step.
template <typename Rhs, typename Observer>
Vector integrate(Rhs&& rhs, double t0, const Vector& y0, double t1, const OdeOptions& opt,
                 Observer&& observer) {
    double t = t0;
    Vector y = y0;
    observer(t, y);
    if (t1 <= t0) return y;

    Vector k1 = rhs(t, y);
    double h = opt.h_init;
    if (h <= 0.0) {
        double ynorm = std::max(1e-8, y.norm());
        double dnorm = std::max(1e-8, k1.norm());
        h = std::min({0.01 * ynorm / dnorm, (t1 - t0) / 10.0, opt.h_max});
    }
    h = std::min(h, opt.h_max);

    int consecutive_guard = 0;
    long long steps = 0;
    const Index n = y.size();
    Vector k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ynew(n), yerr(n);

    while (t < t1) {
        if (++steps > opt.max_steps) throw StepUnderflow("rk45: step budget exhausted");
        h = std::min(h, t1 - t);
        if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t)))
            throw StepUnderflow("rk45: step size underflow at t=" + std::to_string(t));

        bool guard_hit = false;
        double err = 0.0;
        try {
            using namespace detail;
            k2 = rhs(t + C2 * h, y + h * (A21 * k1));
            k3 = rhs(t + C3 * h, y + h * (A31 * k1 + A32 * k2));
            k4 = rhs(t + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3));
            k5 = rhs(t + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
            k6 = rhs(t + h, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
            ynew = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
            k7 = rhs(t + h, ynew);
            yerr = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
            double acc = 0.0;
            for (Index i = 0; i < n; ++i) {
                double sc = opt.atol + opt.rtol * std::max(std::abs(y(i)), std::abs(ynew(i)));
                double r = yerr(i) / sc;
                acc += r * r;
            }
            err = std::sqrt(acc / static_cast<double>(std::max<Index>(n, 1)));
        } catch (const FunnelBoundaryReached& e) {
            guard_hit = true;
            if (++consecutive_guard > opt.max_halvings)
                throw StepUnderflow(std::string("rk45: gain blow-up, funnel level ") +
                                    std::to_string(e.level) + " pinned at t=" +
                                    std::to_string(e.time));
        }

        if (guard_hit) {
            h *= 0.5;
            continue;
        }
        if (err <= 1.0) {
            consecutive_guard = 0;
            t += h;
            y.swap(ynew);
            k1.swap(k7);  // FSAL
            observer(t, y);
            double fac = (err == 0.0) ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            h = std::min(h * fac, opt.h_max);
        } else {
            h *= std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
        }
    }
    return y;
}

template <typename Rhs>
Vector integrate_to(Rhs&& rhs, double t0, const Vector& y0, double t1, const OdeOptions& opt) {
    return integrate(std::forward<Rhs>(rhs), t0, y0, t1, opt, [](double, const Vector&) {});
}

/// Integrate hitting every grid time exactly; observer is invoked at grid
/// times only (the grid must be strictly increasing and start at t0).
template <typename Rhs, typename Observer>
Vector integrate_grid(Rhs&& rhs, const std::vector<double>& grid, const Vector& y0,
                      const OdeOptions& opt, Observer&& observer) {
    if (grid.empty()) return y0;
    Vector y = y0;
    observer(grid.front(), y);
    for (size_t i = 1; i < grid.size(); ++i) {
        y = integrate_to(rhs, grid[i - 1], y, grid[i], opt);
        observer(grid[i], y);
    }
    return y;
}

inline std::vector<double> uniform_grid(double t0, double t1, Index points) {
    std::vector<double> g(static_cast<size_t>(points));
    for (Index i = 0; i < points; ++i)
        g[static_cast<size_t>(i)] =
            t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(points - 1);
    g.back() = t1;
    return g;
}

}  // namespace funnelctl::ode
