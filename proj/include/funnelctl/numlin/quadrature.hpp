#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "funnelctl/core.hpp"

namespace funnelctl::numlin {

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre recurrence (machine precision, no tabulated constants).
inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.assign(static_cast<size_t>(n), 0.0);
    weights.assign(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        nodes[static_cast<size_t>(i)] = -x;
        nodes[static_cast<size_t>(n - 1 - i)] = x;
        double w = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[static_cast<size_t>(i)] = w;
        weights[static_cast<size_t>(n - 1 - i)] = w;
    }
}

using VectorIntegrand = std::function<Vector(double)>;

inline Vector gl_panel(const VectorIntegrand& f, double a, double b,
                       const std::vector<double>& x, const std::vector<double>& w) {
    const double mid = (a + b) / 2.0, half = (b - a) / 2.0;
    Vector acc = w[0] * f(mid + half * x[0]);
    for (size_t i = 1; i < x.size(); ++i) acc += w[i] * f(mid + half * x[i]);
    return half * acc;
}

/// Adaptive panel quadrature (10-point Gauss with bisection-based error
/// estimate). Breakpoints are honored as hard panel boundaries.
inline Vector adaptive_quadrature(const VectorIntegrand& f, double a, double b, double tol,
                                  std::vector<double> breakpoints = {}) {
    static std::vector<double> x10, w10;
    if (x10.empty()) gauss_legendre(10, x10, w10);

    breakpoints.push_back(a);
    breakpoints.push_back(b);
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());

    Vector total;
    bool first = true;
    const double span = b - a;
    std::function<Vector(double, double, const Vector&, int)> refine =
        [&](double lo, double hi, const Vector& coarse, int depth) -> Vector {
        double mid = (lo + hi) / 2.0;
        Vector left = gl_panel(f, lo, mid, x10, w10);
        Vector right = gl_panel(f, mid, hi, x10, w10);
        Vector fine = left + right;
        double err = (fine - coarse).norm();
        double local_tol = tol * std::max((hi - lo) / span, 1e-3);
        if (err <= local_tol || depth >= 48) return fine;
        return refine(lo, mid, left, depth + 1) + refine(mid, hi, right, depth + 1);
    };

    for (size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        double lo = breakpoints[i], hi = breakpoints[i + 1];
        if (!(lo >= a && hi <= b) || hi <= lo) continue;
        Vector coarse = gl_panel(f, lo, hi, x10, w10);
        Vector part = refine(lo, hi, coarse, 0);
        if (first) {
            total = part;
            first = false;
        } else {
            total += part;
        }
    }
    return total;
}

/// Composite fixed-grid Gauss quadrature (panels * points_per_panel nodes).
inline Vector composite_gauss(const VectorIntegrand& f, double a, double b, int panels,
                              int points_per_panel = 10) {
    std::vector<double> x, w;
    gauss_legendre(points_per_panel, x, w);
    Vector acc;
    for (int p = 0; p < panels; ++p) {
        double lo = a + (b - a) * p / panels;
        double hi = a + (b - a) * (p + 1) / panels;
        Vector part = gl_panel(f, lo, hi, x, w);
        if (p == 0)
            acc = part;
        else
            acc += part;
    }
    return acc;
}

}  // namespace funnelctl::numlin
