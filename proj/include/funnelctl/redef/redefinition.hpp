#pragma once

#include <vector>

#include "funnelctl/lti/normal_form.hpp"
#include "funnelctl/lti/relative_degree.hpp"
#include "funnelctl/redef/decomposition.hpp"

namespace funnelctl::redef {

/// New output y_new = K eta2 raising the relative degree to r + ell while the
/// remaining internal dynamics (Qhat1) are strictly stable. Carries the full
/// closed-form chain system for the new output and the measurement maps.
struct OutputRedefinition {
    Index r = 0, ell = 0, m = 0, k = 0;  // k: dimension of the remaining internal part
    Matrix k_row;                        // K (m x ell*m)
    std::vector<Matrix> f_coeffs;        // F_1..F_ell: eta2 = sum F_i y_new^{(i-1)}
    std::vector<Matrix> r_hat;           // Rhat_1..Rhat_{r+ell}
    std::vector<Matrix> d_coeffs;        // D_i = Gamma^{-1} R_i (input-channel disturbance weights)
    std::vector<Matrix> p_hat_new;       // Phat_1..Phat_{ell+1}
    Matrix s1_new;                       // coefficient of the remaining internal state
    double theta_cond = 1.0;             // cond of the stacked K Qtilde^j map

    Matrix gamma;            // copied plant data used by downstream modules
    Matrix q_tilde, p_tilde;

    Matrix refined_embed;    // x -> (y-chain, eta1, eta2) refined coordinates
    Matrix a_refined;        // dynamics in refined coordinates (d = 0 part)
    Matrix b_refined;
    Matrix to_chain;         // refined -> (y_new chain, eta1)
    Matrix to_chain_inv;
    Matrix a_new, b_new, c_new;  // chain-coordinate system of the new output

    Matrix h_bif;  // (r+ell)m x n: refined state -> (y_new, ..., y_new^{(r+ell-1)})
    Matrix h_x;    // same map composed onto the original state

    Index chain_len() const { return r + ell; }
};

/// Assemble the redefinition from the normal form and the isolation.
inline OutputRedefinition build_redefinition(const lti::NormalForm& nf,
                                             const UnstableIsolation& iso,
                                             double tol_struct = 1e-8) {
    OutputRedefinition red;
    const Index r = nf.r, m = nf.m, n = nf.n;
    const Index ell = iso.ell, lm = ell * m, k = iso.k_dim;
    red.r = r;
    red.ell = ell;
    red.m = m;
    red.k = k;
    red.gamma = nf.gamma;
    red.q_tilde = iso.q_tilde;
    red.p_tilde = iso.p_tilde;

    Eigen::FullPivLU<Matrix> glu(nf.gamma);
    if (!glu.isInvertible()) throw NumericalError("build_redefinition: singular input gain");
    Matrix gamma_inv = glu.inverse();

    // K = [0,...,0,Gamma^{-1}] [Ptilde, Qtilde Ptilde, ...]^{-1}; the isolation
    // normalizes the Krylov matrix to I, so this is exact by construction.
    if (ell > 0) {
        Matrix krylov(lm, lm);
        Matrix col = iso.p_tilde;
        for (Index j = 0; j < ell; ++j) {
            krylov.middleCols(j * m, m) = col;
            col = iso.q_tilde * col;
        }
        Matrix rhs = Matrix::Zero(m, lm);
        rhs.middleCols((ell - 1) * m, m) = gamma_inv;
        red.k_row = krylov.transpose().fullPivLu().solve(rhs.transpose()).transpose();
    } else {
        red.k_row = Matrix(m, 0);
    }

    // F_i blocks of the inverse of the stacked [K; K Qtilde; ...]
    if (ell > 0) {
        Matrix theta(lm, lm);
        Matrix row = red.k_row;
        for (Index j = 0; j < ell; ++j) {
            theta.middleRows(j * m, m) = row;
            row = row * iso.q_tilde;
        }
        red.theta_cond = cond2(theta);
        Matrix theta_inv = theta.fullPivLu().inverse();
        for (Index i = 0; i < ell; ++i) red.f_coeffs.push_back(theta_inv.middleCols(i * m, m));
    }

    for (Index i = 0; i < r; ++i)
        red.d_coeffs.push_back(gamma_inv * nf.r_coeffs[static_cast<size_t>(i)]);

    // refined coordinates: (y, ..., y^{(r-1)}, eta1, eta2)
    Matrix embed = Matrix::Zero(n, n);
    Matrix embed_inv = Matrix::Zero(n, n);
    embed.topLeftCorner(r * m, r * m).setIdentity();
    embed_inv.topLeftCorner(r * m, r * m).setIdentity();
    if (n > r * m) {
        embed.bottomRightCorner(n - r * m, n - r * m) = iso.t_transform;
        embed_inv.bottomRightCorner(n - r * m, n - r * m) = iso.t_inverse;
    }
    red.refined_embed = embed * nf.u_transform;

    Matrix a_ref = embed * nf.state_matrix() * embed_inv;
    red.a_refined = a_ref;
    red.b_refined = Matrix::Zero(n, m);
    red.b_refined.middleRows((r - 1) * m, m) = nf.gamma;

    // chain map: rows y_new^{(j)} = K Qtilde^j eta2 + sum K Qtilde^{j-1-i} Ptilde y^{(i)}
    const Index rho = r + ell;
    Matrix tmap = Matrix::Zero(n, n);
    std::vector<Matrix> kqj;  // K Qtilde^j
    {
        Matrix cur = red.k_row;
        for (Index j = 0; j <= rho; ++j) {
            kqj.push_back(cur);
            if (ell > 0) cur = cur * iso.q_tilde;
        }
    }
    for (Index j = 0; j < rho; ++j) {
        if (ell > 0) tmap.block(j * m, r * m + k, m, lm) = kqj[static_cast<size_t>(j)];
        for (Index i = 0; ell > 0 && i + ell <= j; ++i)
            tmap.block(j * m, i * m, m, m) = kqj[static_cast<size_t>(j - 1 - i)] * iso.p_tilde;
        if (ell == 0) tmap.block(j * m, j * m, m, m).setIdentity();
    }
    if (k > 0) tmap.block(rho * m, r * m, k, k).setIdentity();
    red.to_chain = tmap;
    Eigen::FullPivLU<Matrix> tlu(tmap);
    if (!tlu.isInvertible())
        throw NumericalError("build_redefinition: chain coordinate map is singular");
    red.to_chain_inv = tlu.inverse();

    Matrix a_new = tmap * a_ref * red.to_chain_inv;
    Matrix b_new = tmap * red.b_refined;
    const double scale = std::max(1.0, a_new.norm());

    // structure checks: shift chain, unit input weight, internal coupling cut-off
    for (Index j = 0; j + 1 < rho; ++j) {
        Matrix row = a_new.middleRows(j * m, m);
        row.middleCols((j + 1) * m, m) -= Matrix::Identity(m, m);
        if (row.norm() > tol_struct * scale)
            throw NumericalError("build_redefinition: new-output chain residual " +
                                 std::to_string(row.norm()));
        a_new.middleRows(j * m, m).setZero();
        a_new.block(j * m, (j + 1) * m, m, m).setIdentity();
    }
    // with ell > 0 the new output absorbs Gamma^{-1}: unit input weight
    Matrix expected_gain = (ell > 0) ? Matrix(Matrix::Identity(m, m)) : nf.gamma;
    {
        Matrix bcheck = b_new;
        bcheck.middleRows((rho - 1) * m, m) -= expected_gain;
        if (bcheck.norm() > tol_struct * std::max(1.0, b_new.norm()))
            throw NumericalError("build_redefinition: unexpected input weight on the chain");
        b_new.setZero();
        b_new.middleRows((rho - 1) * m, m) = expected_gain;
    }
    if (k > 0) {
        Matrix cross = a_new.block(rho * m, (ell + 1) * m, k, (rho - ell - 1) * m);
        if (cross.norm() > tol_struct * scale)
            throw NumericalError(
                "build_redefinition: internal rows couple beyond the expected chain depth");
        a_new.block(rho * m, (ell + 1) * m, k, (rho - ell - 1) * m).setZero();
    }

    for (Index i = 0; i < rho; ++i) red.r_hat.push_back(a_new.block((rho - 1) * m, i * m, m, m));
    red.s1_new = a_new.block((rho - 1) * m, rho * m, m, k);
    for (Index j = 0; j <= ell; ++j)
        red.p_hat_new.push_back(k > 0 ? Matrix(a_new.block(rho * m, j * m, k, m)) : Matrix(0, m));

    red.a_new = a_new;
    red.b_new = b_new;
    red.c_new = Matrix::Zero(m, n);
    red.c_new.leftCols(m).setIdentity();

    red.h_bif = tmap.topRows(rho * m);
    red.h_x = red.h_bif * red.refined_embed;
    return red;
}

/// Certificate: the closed-form system with the new output has strict relative
/// degree r + ell; the high-gain matrix is I for ell > 0 (Gamma when bypassed).
inline Certificate verify_new_relative_degree(const OutputRedefinition& red) {
    Certificate cert;
    cert.name = "new-relative-degree";
    lti::LtiSystem chain_sys(red.a_new, red.b_new, red.c_new);
    Matrix expected = (red.ell > 0) ? Matrix(Matrix::Identity(red.m, red.m)) : red.gamma;
    try {
        auto rd = lti::relative_degree(chain_sys);
        cert.metrics["r_new"] = static_cast<double>(rd.r);
        cert.metrics["gain_residual"] = (rd.gamma - expected).norm();
        cert.pass = (rd.r == red.chain_len()) && cert.metrics["gain_residual"] < 1e-8;
    } catch (const Error& e) {
        cert.pass = false;
        cert.detail = e.what();
    }
    return cert;
}

}  // namespace funnelctl::redef
