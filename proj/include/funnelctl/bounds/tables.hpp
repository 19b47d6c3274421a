#pragma once

#include <vector>

#include "funnelctl/bounds/epsilon.hpp"
#include "funnelctl/redef/redefinition.hpp"

namespace funnelctl::bounds {

/// Pointwise derivative-bound tables for the cascade signals:
///   e_bd[i][j]      bounds ||e_i^{(j)}||            (N)
///   e_sq_bd[i][j]   bounds |(||e_i||^2)^{(j)}|      (L)
///   phi_sq_bd[i][j] bounds |(phi_i^2)^{(j)}|        (Phi)
///   gain_arg_bd[i][j] bounds the (j+1)-th derivative of phi_i^2 ||e_i||^2 (Sigma)
///   k_bd[i][j]      bounds |k_i^{(j)}|              (K)
///   ke_bd[i][j]     bounds ||(k_i e_i)^{(j)}||      (M)
/// khat[i+1] is the feedback-term bound for level i (khat[0] is the i = -1
/// convention, identically zero). Inner sums with an empty range are zero;
/// this convention reproduces the closed forms for the first two khat levels.
struct BoundTables {
    std::vector<double> t;
    using Table = std::vector<std::vector<std::vector<double>>>;  // [i][j][grid]
    Table e_bd, e_sq_bd, phi_sq_bd, gain_arg_bd, k_bd, ke_bd;
    std::vector<std::vector<double>> khat;  // [i+1][grid], i = -1..rho-2
    std::vector<double> alphas;             // alpha_1..alpha_{ell+1}
    std::vector<double> psi_bound;          // Psi(t)

    double khat_at(Index i, size_t g) const {  // i = -1..rho-2
        return khat[static_cast<size_t>(i + 1)][g];
    }
};

/// Evaluate the recursion tables pointwise on the grid. profiles must hold the
/// margin solutions for levels 0..rho-2 on the same grid.
inline BoundTables build_tables(const funnel::FunnelSpec& spec,
                                const std::vector<EpsilonProfile>& profiles,
                                const std::vector<double>& grid) {
    const Index rho = spec.rho();
    if (static_cast<Index>(profiles.size()) + 1 != rho)
        throw NumericalError("build_tables: need margin profiles for levels 0..rho-2");
    for (const auto& p : profiles)
        if (p.eps.size() != grid.size()) throw NumericalError("build_tables: grid mismatch");

    BoundTables tb;
    tb.t = grid;
    auto sized = [&](Index levels, Index jextra) {
        BoundTables::Table t(static_cast<size_t>(levels));
        for (Index i = 0; i < levels; ++i)
            t[static_cast<size_t>(i)].assign(static_cast<size_t>(rho - i + jextra),
                                             std::vector<double>(grid.size(), 0.0));
        return t;
    };
    // j ranges: e_bd[i]: j <= rho-1-i ; others for i <= rho-2
    tb.e_bd = sized(rho, 0);          // [i][j], j = 0..rho-1-i
    tb.e_sq_bd = sized(rho - 1, 0);   // j = 0..rho-1-i
    tb.phi_sq_bd = sized(rho - 1, 0);
    tb.gain_arg_bd = sized(rho - 1, -1);  // j = 0..rho-2-i
    tb.k_bd = sized(rho - 1, 0);
    tb.ke_bd = sized(rho - 1, 0);

    std::vector<std::vector<double>> phid(static_cast<size_t>(rho - 1));

    for (size_t g = 0; g < grid.size(); ++g) {
        const double t = grid[g];
        for (Index i = 0; i + 1 < rho; ++i)
            spec.level(i).phi_derivs(t, rho - 1 - i, phid[static_cast<size_t>(i)]);

        auto N = [&](Index i, Index j) -> double& {
            return tb.e_bd[static_cast<size_t>(i)][static_cast<size_t>(j)][g];
        };
        auto L = [&](Index i, Index j) -> double& {
            return tb.e_sq_bd[static_cast<size_t>(i)][static_cast<size_t>(j)][g];
        };
        auto PH = [&](Index i, Index j) -> double& {
            return tb.phi_sq_bd[static_cast<size_t>(i)][static_cast<size_t>(j)][g];
        };
        auto SG = [&](Index i, Index j) -> double& {
            return tb.gain_arg_bd[static_cast<size_t>(i)][static_cast<size_t>(j)][g];
        };
        auto KB = [&](Index i, Index j) -> double& {
            return tb.k_bd[static_cast<size_t>(i)][static_cast<size_t>(j)][g];
        };
        auto MB = [&](Index i, Index j) -> double& {
            return tb.ke_bd[static_cast<size_t>(i)][static_cast<size_t>(j)][g];
        };
        auto phiabs = [&](Index i, Index l) {
            return std::abs(phid[static_cast<size_t>(i)][static_cast<size_t>(l)]);
        };

        // j = 0 seeds
        for (Index i = 0; i < rho; ++i) N(i, 0) = spec.level(i).psi(t);
        for (Index i = 0; i + 1 < rho; ++i) {
            const double eps = profiles[static_cast<size_t>(i)].eps[g];
            L(i, 0) = N(i, 0) * N(i, 0);
            PH(i, 0) = phiabs(i, 0) * phiabs(i, 0);
            KB(i, 0) = N(i, 0) / eps;
            MB(i, 0) = N(i, 0) * KB(i, 0);
        }

        for (Index j = 1; j <= rho - 1; ++j) {
            // N, L, Phi at order j
            for (Index i = 0; i + j <= rho - 1; ++i) {
                if (i + 1 < rho) N(i, j) = (i + 1 <= rho - 1 ? N(i + 1, j - 1) : 0.0) + MB(i, j - 1);
                if (i + 1 < rho) {
                    double lsum = 0.0, psum = 0.0;
                    for (Index l = 0; l <= j - 1; ++l) {
                        double bc = static_cast<double>(binomial(j - 1, l));
                        lsum += bc * N(i, l) * N(i, j - l);
                        psum += bc * phiabs(i, l) * phiabs(i, j - l);
                    }
                    L(i, j) = 2.0 * lsum;
                    PH(i, j) = 2.0 * psum;
                }
            }
            // Sigma at order j-1
            for (Index i = 0; i + j <= rho - 1 && i + 1 < rho; ++i) {
                const Index js = j - 1;
                double v = 0.5 * (PH(i, 0) * L(i, js + 1) + PH(i, 1) * L(i, js) +
                                  PH(i, js) * L(i, 1) + L(i, 0) * PH(i, js + 1));
                for (Index l1 = 1; l1 <= js - 1; ++l1) {
                    double inner_n = 0.0;
                    for (Index l2 = 0; l2 <= js - l1; ++l2)
                        inner_n += static_cast<double>(binomial(js - l1, l2)) * N(i, l2) *
                                   N(i, js - l1 - l2);
                    double inner_p = 0.0;
                    for (Index l2 = 0; l2 <= l1; ++l2)
                        inner_p += static_cast<double>(binomial(l1, l2)) * phiabs(i, l2) *
                                   phiabs(i, l1 - l2);
                    v += static_cast<double>(binomial(js, l1)) *
                         (PH(i, l1) * inner_n + L(i, js - l1) * inner_p);
                }
                SG(i, js) = v;
            }
            // K and M at order j
            for (Index i = 0; i + j <= rho - 1 && i + 1 < rho; ++i) {
                double v = KB(i, 0) * KB(i, 0) * SG(i, j - 1);
                for (Index l1 = 1; l1 <= j - 1; ++l1)
                    for (Index l2 = 0; l2 <= l1 - 1; ++l2)
                        v += static_cast<double>(binomial(j - 1, l1)) *
                             static_cast<double>(binomial(l1 - 1, l2)) * SG(i, j - l1 - 1) *
                             KB(i, l2 + 1) * KB(i, l1 - l2 - 1);
                KB(i, j) = v;
                double mv = 0.0;
                for (Index l = 0; l <= j; ++l)
                    mv += static_cast<double>(binomial(j, l)) * KB(i, l) * N(i, j - l);
                MB(i, j) = mv;
            }
        }
    }

    tb.khat.assign(static_cast<size_t>(rho), std::vector<double>(grid.size(), 0.0));
    for (Index i = 0; i + 1 < rho; ++i)
        for (size_t g = 0; g < grid.size(); ++g) {
            double v = 0.0;
            for (Index j = 0; j <= i; ++j)
                v += tb.ke_bd[static_cast<size_t>(j)][static_cast<size_t>(i - j)][g];
            tb.khat[static_cast<size_t>(i + 1)][g] = v;
        }
    return tb;
}

/// alpha weights and the a-priori envelope
///   Psi(t) = sum_{i=1}^{ell+1} alpha_i (psi_{i-1}(t) + khat_{i-2}(t)).
inline std::vector<double> error_bound(const redef::OutputRedefinition& red, BoundTables& tb,
                                       const funnel::FunnelSpec& spec) {
    const Index ell = red.ell;
    tb.alphas.clear();
    Matrix kql = red.k_row;  // K Qtilde^ell
    for (Index j = 0; j < ell; ++j) kql = kql * red.q_tilde;
    for (Index i = 1; i <= ell; ++i)
        tb.alphas.push_back(norm2(Matrix(red.gamma * kql * red.f_coeffs[static_cast<size_t>(i - 1)])));
    tb.alphas.push_back(norm2(red.gamma));

    tb.psi_bound.assign(tb.t.size(), 0.0);
    for (size_t g = 0; g < tb.t.size(); ++g) {
        double v = 0.0;
        for (Index i = 1; i <= ell + 1; ++i)
            v += tb.alphas[static_cast<size_t>(i - 1)] *
                 (spec.level(i - 1).psi(tb.t[g]) + tb.khat_at(i - 2, g));
        tb.psi_bound[g] = v;
    }
    return tb.psi_bound;
}

/// Grid check of the funnel-design inequality for a target funnel:
///   sum alpha_i (psi_{i-1}(t) + khat_{i-2}(t)) < 1/phi_target(t).
inline Certificate design_inequality_check(const BoundTables& tb,
                                           const funnel::FunnelFunction& phi_target,
                                           double e0_norm_at_0 = 0.0) {
    Certificate cert;
    cert.name = "design-inequality";
    if (tb.psi_bound.empty())
        throw NumericalError("design_inequality_check: error_bound must run first");
    cert.pass = phi_target.phi(0.0) * e0_norm_at_0 < 1.0;
    if (!cert.pass) cert.detail = "target funnel excludes the initial error";
    double worst_ratio = 0.0, worst_t = 0.0;
    for (size_t g = 0; g < tb.t.size(); ++g) {
        double ratio = tb.psi_bound[g] / phi_target.psi(tb.t[g]);
        if (ratio > worst_ratio) {
            worst_ratio = ratio;
            worst_t = tb.t[g];
        }
    }
    cert.metrics["worst_ratio"] = worst_ratio;
    cert.metrics["worst_time"] = worst_t;
    if (worst_ratio >= 1.0) {
        cert.pass = false;
        cert.detail = "envelope exceeds the target boundary; shrink the asymptotic widths";
    }
    return cert;
}

}  // namespace funnelctl::bounds
