#pragma once

#include <cmath>

#include "funnelctl/numlin/quadrature.hpp"
#include "funnelctl/numlin/sylvester.hpp"
#include "funnelctl/ode/rk45.hpp"
#include "funnelctl/redef/split.hpp"
#include "funnelctl/refgen/reference.hpp"

namespace funnelctl::refgen {

struct QuadratureOptions {
    double tol = 1e-10;
    double horizon_cap = 1e4;  // truncation-time safety cap (in units of 1/decay)
};

namespace detail {

inline double min_antistable_decay(const Matrix& q2, double tol_axis) {
    if (q2.rows() == 0) return std::numeric_limits<double>::infinity();
    double alpha = std::numeric_limits<double>::infinity();
    for (const auto& l : numlin::eigenvalues_of(q2)) alpha = std::min(alpha, l.real());
    if (alpha <= tol_axis)
        throw SlowDecay("antistable block decay rate " + std::to_string(alpha) +
                        " too small for the improper integral");
    return alpha;
}

}  // namespace detail

/// Start value of the reference governor making its antistable component
/// bounded: the improper integral of e^{-Q2 (s - t0)} P2 y_ref(s) over
/// [t0, inf), embedded through the antistable slot with a minus sign.
/// A constant tail after y_ref.support_end is integrated in closed form.
inline Vector generator_init_quadrature(const redef::SpectralSplit& split,
                                        const ReferenceSignal& y_ref, double t0 = 0.0,
                                        const QuadratureOptions& opts = {},
                                        const Tolerances& tol = {}) {
    const Index k2 = split.k2;
    const Index total = split.k1 + split.k2 + split.k3;
    if (k2 == 0) return Vector::Zero(total);

    const double alpha =
        detail::min_antistable_decay(split.q2, tol.axis * std::max(1.0, split.q2.norm()));

    numlin::VectorIntegrand f = [&](double sigma) -> Vector {
        return numlin::expm(split.q2, -sigma) * (split.p2 * y_ref(t0 + sigma, 0));
    };

    double t_num_end;  // numeric part integrates sigma in [0, t_num_end]
    bool closed_tail = false;
    if (y_ref.support_end) {
        t_num_end = std::max(0.0, *y_ref.support_end - t0);
        closed_tail = true;
    } else {
        double sup_y = 0.0;
        for (int i = 0; i <= 200; ++i)
            sup_y = std::max(sup_y, y_ref(t0 + 20.0 / alpha * i / 200.0, 0).norm());
        double t = 1.0 / alpha;
        while (t < opts.horizon_cap / alpha) {
            double tail_bound =
                numlin::expm(split.q2, -t).norm() * split.p2.norm() * std::max(sup_y, 1.0) / alpha;
            if (tail_bound <= 0.1 * opts.tol) break;
            t *= 1.5;
        }
        t_num_end = t;
    }

    Vector integral = Vector::Zero(k2);
    if (t_num_end > 0.0) {
        std::vector<double> bps;
        for (double b : y_ref.breakpoints) {
            double s = b - t0;
            if (s > 0.0 && s < t_num_end) bps.push_back(s);
        }
        integral = numlin::adaptive_quadrature(f, 0.0, t_num_end, opts.tol, bps);
    }
    if (closed_tail) {
        Vector c = y_ref(t0 + t_num_end + 1.0, 0);  // constant past support_end
        integral += split.q2.fullPivLu().solve(numlin::expm(split.q2, -t_num_end) * (split.p2 * c));
    }
    return redef::embed_antistable(split, Vector(-integral));
}

/// Same start value via the Sylvester route for exosystem references:
/// Q2 X - X A_e = P2 C_e, init = -W^{-1}[0; X w(t0); 0].
inline Vector generator_init_sylvester(const redef::SpectralSplit& split, const Exosystem& exo,
                                       double t0 = 0.0, const Tolerances& tol = {}) {
    const Index total = split.k1 + split.k2 + split.k3;
    if (split.k2 == 0) return Vector::Zero(total);
    Matrix x = numlin::solve_sylvester(split.q2, exo.a_e, Matrix(split.p2 * exo.c_e), tol);
    Vector w_t0 = numlin::expm(exo.a_e, t0) * exo.w0;
    return redef::embed_antistable(split, Vector(-x * w_t0));
}

/// Reference governor: z' = Qtilde z + Ptilde y_ref(t), yhat = K z, plus the
/// closed-form tables for yhat's derivatives.
struct ReferenceGenerator {
    Index ell = 0, r = 0, m = 0;
    Matrix q_tilde, p_tilde;
    Matrix k_row;
    std::vector<Matrix> kq;   // K Qtilde^j, j = 0..r+ell
    std::vector<Matrix> kqp;  // K Qtilde^s Ptilde, s = 0..r+ell-1 (zero for s < ell-1)
    ReferenceSignal y_ref;
    Vector init;  // governor state at t = 0

    Index state_dim() const { return q_tilde.rows(); }

    Vector rhs(double t, const Vector& z) const {
        if (state_dim() == 0) return Vector(0);
        return q_tilde * z + p_tilde * y_ref(t, 0);
    }

    /// yhat^{(j)}(t) given the governor state; for j >= ell this folds in
    /// y_ref^{(0..j-ell)}(t).
    Vector derivative(const Vector& z, double t, Index j) const {
        if (j > r + ell)
            throw NumericalError("reference derivative order out of range");
        if (ell == 0) return y_ref(t, j);
        Vector v = kq[static_cast<size_t>(j)] * z;
        for (Index i = 0; i + ell <= j; ++i) v += kqp[static_cast<size_t>(j - 1 - i)] * y_ref(t, i);
        return v;
    }
};

inline ReferenceGenerator make_reference_generator(const redef::UnstableIsolation& iso,
                                                   const Matrix& k_row, Index r,
                                                   ReferenceSignal y_ref, Vector init) {
    ReferenceGenerator g;
    g.ell = iso.ell;
    g.r = r;
    g.m = iso.m;
    g.q_tilde = iso.q_tilde;
    g.p_tilde = iso.p_tilde;
    g.k_row = k_row;
    g.y_ref = std::move(y_ref);
    g.init = std::move(init);
    if (g.state_dim() > 0) {
        Matrix cur = k_row;
        for (Index j = 0; j <= r + g.ell; ++j) {
            g.kq.push_back(cur);
            cur = cur * iso.q_tilde;
        }
        for (Index s = 0; s + 1 <= r + g.ell; ++s) {
            Matrix v = g.kq[static_cast<size_t>(s)] * iso.p_tilde;
            if (s + 1 < g.ell) v.setZero();  // structural zeros of the Krylov pattern
            g.kqp.push_back(v);
        }
    }
    return g;
}

/// Integrates the governor over the horizon and audits boundedness of
/// yhat^{(j)} for j <= r+ell; detects the exponential blow-up a wrong start
/// value produces. Optionally reports the antistable component (via split).
inline Certificate boundedness_audit(const ReferenceGenerator& gen, double horizon,
                                     Index grid_points = 1001,
                                     const redef::SpectralSplit* split = nullptr,
                                     ode::OdeOptions opts = {}) {
    Certificate cert;
    cert.name = "reference-boundedness";
    if (gen.state_dim() == 0) {
        cert.pass = true;
        cert.detail = "no governor state";
        return cert;
    }
    auto grid = ode::uniform_grid(0.0, horizon, grid_points);
    std::vector<double> norm_first, norm_second;
    std::vector<double> max_by_order(static_cast<size_t>(gen.r + gen.ell + 1), 0.0);
    double max_z2 = 0.0;
    ode::integrate_grid([&](double t, const Vector& z) { return gen.rhs(t, z); }, grid, gen.init,
                        opts, [&](double t, const Vector& z) {
                            for (Index j = 0; j <= gen.r + gen.ell; ++j)
                                max_by_order[static_cast<size_t>(j)] = std::max(
                                    max_by_order[static_cast<size_t>(j)],
                                    gen.derivative(z, t, j).norm());
                            double zn = z.norm();
                            (t <= horizon / 2.0 ? norm_first : norm_second).push_back(zn);
                            if (split && split->k2 > 0) {
                                Vector w = split->w_transform * z;
                                max_z2 = std::max(max_z2, w.segment(split->k1, split->k2).norm());
                            }
                        });
    double m1 = norm_first.empty() ? 0.0 : *std::max_element(norm_first.begin(), norm_first.end());
    double m2 =
        norm_second.empty() ? 0.0 : *std::max_element(norm_second.begin(), norm_second.end());
    for (Index j = 0; j <= gen.r + gen.ell; ++j)
        cert.metrics["max_order" + std::to_string(j)] = max_by_order[static_cast<size_t>(j)];
    cert.metrics["first_half_max"] = m1;
    cert.metrics["second_half_max"] = m2;
    if (split) cert.metrics["antistable_component_max"] = max_z2;
    const double floor = 1e-9 * std::max(1.0, m1);
    cert.pass = (m2 <= 3.0 * m1 + floor);
    if (!cert.pass)
        cert.detail = "governor state grows over the horizon: wrong start value or unstable "
                      "reference insertion";
    return cert;
}

}  // namespace funnelctl::refgen
