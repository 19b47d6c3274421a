#pragma once

#include <sstream>
#include <vector>

#include "funnelctl/lti/relative_degree.hpp"
#include "funnelctl/lti/system.hpp"

namespace funnelctl::lti {

/// Normal form of the plant under the state transform U:
/// U x = (y, y', ..., y^{(r-1)}, eta), with
///   y^{(r)} = sum R_i y^{(i-1)} + S eta + Gamma u + d_r,
///   eta'    = P y + Q eta + d_eta.
struct NormalForm {
    Index r = 0;
    Index n = 0;
    Index m = 0;
    Matrix u_transform;            // U (n x n)
    Matrix u_inverse;              // U^{-1}
    std::vector<Matrix> r_coeffs;  // R_1..R_r, each m x m
    Matrix s;                      // m x (n - r m)
    Matrix p;                      // (n - r m) x m
    Matrix q;                      // (n - r m) x (n - r m)
    Matrix gamma;                  // C A^{r-1} B

    Index internal_dim() const { return n - r * m; }

    /// State matrix of the normal-form coordinates with the exact block
    /// pattern (shift chain / R,S / P,Q) enforced.
    Matrix state_matrix() const {
        Matrix a = Matrix::Zero(n, n);
        const Index k = internal_dim();
        for (Index i = 0; i + 1 < r; ++i)
            a.block(i * m, (i + 1) * m, m, m) = Matrix::Identity(m, m);
        for (Index i = 0; i < r; ++i)
            a.block((r - 1) * m, i * m, m, m) = r_coeffs[static_cast<size_t>(i)];
        if (k > 0) {
            a.block((r - 1) * m, r * m, m, k) = s;
            a.block(r * m, 0, k, m) = p;
            a.block(r * m, r * m, k, k) = q;
        }
        return a;
    }

    /// Input matrix in normal-form coordinates: [0; ...; Gamma; 0].
    Matrix input_matrix() const {
        Matrix b = Matrix::Zero(n, m);
        b.block((r - 1) * m, 0, m, m) = gamma;
        return b;
    }

    /// d -> (0, ..., 0, d_r, d_eta) in normal-form coordinates.
    Vector transform_disturbance(const Vector& d) const { return u_transform * d; }
};

namespace detail {

// Rows of V are drawn from the row space of the projector
// Pi = I - Btilde (Ctilde Btilde)^{-1} Ctilde (the annihilator of
// im[B, AB, ..., A^{r-1}B]); exact coordinate rows e_j are preferred so that
// plants whose internal states are plain coordinates keep them.
inline Matrix complement_rows(const Matrix& pi, const Matrix& btilde, Index want) {
    const Index n = pi.rows();
    std::vector<RowVector> rows;
    std::vector<bool> used(static_cast<size_t>(n), false);
    const double bscale = std::max(1.0, btilde.norm());
    for (Index j = 0; j < n && static_cast<Index>(rows.size()) < want; ++j) {
        if ((btilde.row(j)).norm() <= 1e-12 * bscale) {
            rows.push_back(RowVector::Unit(n, j));
            used[static_cast<size_t>(j)] = true;
        }
    }
    if (static_cast<Index>(rows.size()) < want) {
        // fill from an orthonormal basis of the row space of Pi
        Eigen::JacobiSVD<Matrix> svd(pi, Eigen::ComputeFullV);
        Matrix v = svd.matrixV();
        const auto& sv = svd.singularValues();
        for (Index i = 0; i < sv.size() && static_cast<Index>(rows.size()) < want; ++i) {
            if (sv(i) <= 1e-10 * std::max(1.0, sv(0))) break;
            RowVector cand = v.col(i).transpose();
            for (const auto& rw : rows) cand -= (cand.dot(rw) / rw.squaredNorm()) * rw;
            if (cand.norm() > 1e-8) {
                cand.normalize();
                Index imax;
                cand.cwiseAbs().maxCoeff(&imax);
                if (cand(imax) < 0.0) cand = -cand;
                rows.push_back(cand);
            }
        }
    }
    if (static_cast<Index>(rows.size()) != want)
        throw CompletionFailure("byrnes_isidori: no complement completing the derivative chain");
    Matrix v0(want, n);
    for (Index i = 0; i < want; ++i) v0.row(i) = rows[static_cast<size_t>(i)];
    return v0;
}

}  // namespace detail

/// Construct the normal form for a plant with verified strict relative degree r.
inline NormalForm byrnes_isidori(const LtiSystem& sys, Index r, double tol_struct = 1e-8) {
    const Index n = sys.n(), m = sys.m();
    if (r < 1 || r * m > n) throw CompletionFailure("byrnes_isidori: invalid relative degree");
    const Index k = n - r * m;

    Matrix ctilde(r * m, n);
    Matrix btilde(n, r * m);
    Matrix cak = sys.c;
    Matrix akb = sys.b;
    for (Index i = 0; i < r; ++i) {
        ctilde.middleRows(i * m, m) = cak;
        btilde.middleCols(i * m, m) = akb;
        cak = cak * sys.a;
        akb = sys.a * akb;
    }
    Matrix gamma = ctilde.middleRows((r - 1) * m, m) * sys.b;  // C A^{r-1} B

    Matrix u(n, n);
    u.topRows(r * m) = ctilde;
    if (k > 0) {
        Eigen::FullPivLU<Matrix> hlu(ctilde * btilde);
        if (!hlu.isInvertible())
            throw CompletionFailure("byrnes_isidori: Markov block matrix is singular");
        Matrix pi = Matrix::Identity(n, n) - btilde * hlu.solve(ctilde);
        Matrix v0 = detail::complement_rows(pi, btilde, k);
        u.bottomRows(k) = v0 * pi;
        // exact coordinate rows pass through the projector unchanged; keep them exact
        for (Index i = 0; i < k; ++i) {
            RowVector r0 = v0.row(i);
            if ((u.bottomRows(k).row(i) - r0).norm() <= 1e-9 * std::max(1.0, r0.norm()))
                u.bottomRows(k).row(i) = r0;
        }
    }

    Eigen::FullPivLU<Matrix> ulu(u);
    if (!ulu.isInvertible())
        throw CompletionFailure("byrnes_isidori: state transform is singular");
    Matrix uinv = ulu.inverse();

    Matrix ahat = u * sys.a * uinv;
    const double scale = std::max(1.0, ahat.norm());

    NormalForm nf;
    nf.r = r;
    nf.n = n;
    nf.m = m;
    nf.u_transform = u;
    nf.u_inverse = uinv;
    nf.gamma = gamma;

    // verify the shift chain in the first (r-1) output-block rows
    for (Index i = 0; i + 1 < r; ++i) {
        Matrix row = ahat.middleRows(i * m, m);
        row.middleCols((i + 1) * m, m) -= Matrix::Identity(m, m);
        if (row.norm() > tol_struct * scale)
            throw CompletionFailure("byrnes_isidori: derivative chain residual " +
                                    std::to_string(row.norm()));
    }
    for (Index i = 0; i < r; ++i)
        nf.r_coeffs.push_back(ahat.block((r - 1) * m, i * m, m, m));
    nf.s = ahat.block((r - 1) * m, r * m, m, k);
    if (k > 0) {
        // internal rows must not touch y', ..., y^{(r-1)}
        Matrix cross = ahat.block(r * m, m, k, (r - 1) * m);
        if (cross.norm() > tol_struct * scale)
            throw CompletionFailure("byrnes_isidori: internal dynamics couple to output derivatives (residual " +
                                    std::to_string(cross.norm()) + ")");
        nf.p = ahat.block(r * m, 0, k, m);
        nf.q = ahat.block(r * m, r * m, k, k);
    } else {
        nf.p = Matrix(0, m);
        nf.q = Matrix(0, 0);
    }

    Matrix ub = u * sys.b;
    ub.middleRows((r - 1) * m, m) -= gamma;
    if (ub.norm() > tol_struct * std::max(1.0, (u * sys.b).norm()))
        throw CompletionFailure("byrnes_isidori: input column pattern residual " +
                                std::to_string(ub.norm()));
    return nf;
}

}  // namespace funnelctl::lti
