#pragma once

#include <vector>

#include "funnelctl/funnel/funnel_function.hpp"

namespace funnelctl::funnel {

/// One evaluation of the controller cascade
///   e_{i+1} = e_i' + k_i e_i,  k_i = 1 / (1 - phi_i^2 ||e_i||^2),
///   u = -k_{rho-1} e_{rho-1}.
struct CascadeState {
    std::vector<Vector> e;   // e_i, i = 0..rho-1
    std::vector<double> k;   // k_i
    Vector u;
    // full derivative tables: e_derivs[i][j] = e_i^{(j)}, j <= rho-1-i
    std::vector<std::vector<Vector>> e_derivs;
    std::vector<std::vector<double>> k_derivs;  // k_i^{(j)}, j <= rho-2-i
};

/// Exact cascade evaluation from the derivatives of the top-level error.
/// e0_derivs[j] = e_0^{(j)}(t) for j = 0..rho-1 (linear functions of the
/// closed-loop state). Throws FunnelBoundaryReached if any level sits within
/// guard_margin of its funnel boundary.
inline CascadeState evaluate_cascade(const FunnelSpec& spec,
                                     const std::vector<Vector>& e0_derivs, double t,
                                     double guard_margin = 1e-10) {
    const Index rho = spec.rho();
    if (static_cast<Index>(e0_derivs.size()) != rho)
        throw NumericalError("evaluate_cascade: need e0 derivatives up to order rho-1");

    CascadeState cs;
    cs.e_derivs.resize(static_cast<size_t>(rho));
    cs.k_derivs.resize(static_cast<size_t>(rho));
    cs.e_derivs[0] = e0_derivs;

    std::vector<double> phid;
    for (Index i = 0; i < rho; ++i) {
        const auto& ei = cs.e_derivs[static_cast<size_t>(i)];
        const Index jmax = rho - 1 - i;  // available derivative orders at this level

        spec.level(i).phi_derivs(t, jmax, phid);
        double phi0 = phid[0];
        double en = ei[0].norm();
        if (phi0 * en >= 1.0 - guard_margin)
            throw FunnelBoundaryReached(static_cast<int>(i), t,
                                        "funnel boundary reached at level " + std::to_string(i));

        // q^{(j)} = (||e_i||^2)^{(j)}, gsq^{(j)} = (phi_i^2)^{(j)}, g = gsq * q
        std::vector<double> q(static_cast<size_t>(jmax) + 1), gsq(static_cast<size_t>(jmax) + 1),
            g(static_cast<size_t>(jmax) + 1);
        for (Index j = 0; j <= jmax; ++j) {
            double qj = 0.0, sj = 0.0;
            for (Index l = 0; l <= j; ++l) {
                double bc = static_cast<double>(binomial(j, l));
                qj += bc * ei[static_cast<size_t>(l)].dot(ei[static_cast<size_t>(j - l)]);
                sj += bc * phid[static_cast<size_t>(l)] * phid[static_cast<size_t>(j - l)];
            }
            q[static_cast<size_t>(j)] = qj;
            gsq[static_cast<size_t>(j)] = sj;
        }
        for (Index j = 0; j <= jmax; ++j) {
            double gj = 0.0;
            for (Index l = 0; l <= j; ++l)
                gj += static_cast<double>(binomial(j, l)) * gsq[static_cast<size_t>(l)] *
                      q[static_cast<size_t>(j - l)];
            g[static_cast<size_t>(j)] = gj;
        }

        // k = 1/(1-g): k^{(j)} = k * sum_{l=1..j} C(j,l) g^{(l)} k^{(j-l)}
        const Index kmax = (i < rho - 1) ? jmax - 1 : 0;
        std::vector<double> kd(static_cast<size_t>(kmax) + 1);
        kd[0] = 1.0 / (1.0 - g[0]);
        for (Index j = 1; j <= kmax; ++j) {
            double acc = 0.0;
            for (Index l = 1; l <= j; ++l)
                acc += static_cast<double>(binomial(j, l)) * g[static_cast<size_t>(l)] *
                       kd[static_cast<size_t>(j - l)];
            kd[static_cast<size_t>(j)] = kd[0] * acc;
        }

        cs.e.push_back(ei[0]);
        cs.k.push_back(kd[0]);
        cs.k_derivs[static_cast<size_t>(i)] = kd;

        if (i < rho - 1) {
            // e_{i+1}^{(j)} = e_i^{(j+1)} + (k_i e_i)^{(j)} for j <= rho-2-i
            std::vector<Vector> next(static_cast<size_t>(jmax));
            for (Index j = 0; j + 1 <= jmax; ++j) {
                Vector v = ei[static_cast<size_t>(j + 1)];
                for (Index l = 0; l <= j; ++l)
                    v += static_cast<double>(binomial(j, l)) * kd[static_cast<size_t>(l)] *
                         ei[static_cast<size_t>(j - l)];
                next[static_cast<size_t>(j)] = v;
            }
            cs.e_derivs[static_cast<size_t>(i + 1)] = std::move(next);
        }
    }

    cs.u = -cs.k.back() * cs.e.back();
    return cs;
}

}  // namespace funnelctl::funnel
