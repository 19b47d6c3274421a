#pragma once

#include "funnelctl/numlin/sylvester.hpp"
#include "funnelctl/redef/decomposition.hpp"

namespace funnelctl::redef {

/// Block-diagonalization W Qtilde W^{-1} = diag(Q1, Q2, Q3) splitting the
/// isolated block into strictly stable / antistable / axis-band parts.
struct SpectralSplit {
    Matrix w_transform;  // W
    Matrix w_inverse;
    Matrix q1, q2, q3;
    Matrix p1, p2, p3;  // W Ptilde split by rows
    Index k1 = 0, k2 = 0, k3 = 0;
};

inline SpectralSplit spectral_split(const UnstableIsolation& iso, const Tolerances& tol = {}) {
    const Index n = iso.q_tilde.rows();
    const Index m = iso.m;
    SpectralSplit sp;
    if (n == 0) {
        sp.w_transform = sp.w_inverse = Matrix::Identity(0, 0);
        sp.q1 = sp.q2 = sp.q3 = Matrix(0, 0);
        sp.p1 = sp.p2 = sp.p3 = Matrix(0, m);
        return sp;
    }

    const double tol_axis = tol.axis * std::max(1.0, iso.q_tilde.norm());
    numlin::SchurDecomposition d = numlin::real_schur(iso.q_tilde);
    auto rank = [tol_axis](Complex l) {
        if (l.real() < -tol_axis) return 0;  // stable cluster leads
        if (l.real() > tol_axis) return 1;   // antistable next
        return 2;                            // axis band trails
    };
    try {
        numlin::reorder_schur(d, rank, tol.swap_sep);
    } catch (const SwapFailure& e) {
        throw ClusterSeparationFailure(std::string("spectral_split: ") + e.what());
    }

    Index k1 = 0, k2 = 0, k3 = 0;
    for (size_t bi = 0; bi < d.block_start.size(); ++bi) {
        Complex l = d.eigenvalues[static_cast<size_t>(d.block_start[bi])];
        switch (rank(l)) {
            case 0: k1 += d.block_size[bi]; break;
            case 1: k2 += d.block_size[bi]; break;
            default: k3 += d.block_size[bi]; break;
        }
    }
    sp.k1 = k1;
    sp.k2 = k2;
    sp.k3 = k3;

    const Matrix& t = d.quasi_triangular;
    Matrix t11 = t.block(0, 0, k1, k1), t22 = t.block(k1, k1, k2, k2),
           t33 = t.block(k1 + k2, k1 + k2, k3, k3);
    Matrix t12 = t.block(0, k1, k1, k2), t13 = t.block(0, k1 + k2, k1, k3),
           t23 = t.block(k1, k1 + k2, k2, k3);

    Matrix x12, x13, x23;
    try {
        x12 = numlin::solve_sylvester(t11, t22, -t12, tol);
        x23 = numlin::solve_sylvester(t22, t33, -t23, tol);
        x13 = numlin::solve_sylvester(t11, t33, Matrix(-(t13 + t12 * x23)), tol);
    } catch (const SpectraNotSeparated& e) {
        throw ClusterSeparationFailure(std::string("spectral_split: ") + e.what());
    }

    Matrix r = Matrix::Identity(n, n);
    r.block(0, k1, k1, k2) = x12;
    r.block(0, k1 + k2, k1, k3) = x13;
    r.block(k1, k1 + k2, k2, k3) = x23;
    Matrix rinv = Matrix::Identity(n, n);
    rinv.block(0, k1, k1, k2) = -x12;
    rinv.block(k1, k1 + k2, k2, k3) = -x23;
    rinv.block(0, k1 + k2, k1, k3) = x12 * x23 - x13;

    sp.w_transform = rinv * d.orthogonal.transpose();
    sp.w_inverse = d.orthogonal * r;

    Matrix qd = sp.w_transform * iso.q_tilde * sp.w_inverse;
    Matrix offdiag = qd;
    offdiag.block(0, 0, k1, k1).setZero();
    offdiag.block(k1, k1, k2, k2).setZero();
    offdiag.block(k1 + k2, k1 + k2, k3, k3).setZero();
    if (offdiag.norm() > 1e-8 * std::max(1.0, qd.norm()))
        throw ClusterSeparationFailure("spectral_split: decoupling residual " +
                                       std::to_string(offdiag.norm()));
    sp.q1 = qd.block(0, 0, k1, k1);
    sp.q2 = qd.block(k1, k1, k2, k2);
    sp.q3 = qd.block(k1 + k2, k1 + k2, k3, k3);

    Matrix wp = sp.w_transform * iso.p_tilde;
    sp.p1 = wp.topRows(k1);
    sp.p2 = wp.middleRows(k1, k2);
    sp.p3 = wp.bottomRows(k3);
    return sp;
}

/// Embed a k2-sized vector into the isolated-block coordinates through the
/// antistable slot: W^{-1} [0; v; 0].
inline Vector embed_antistable(const SpectralSplit& sp, const Vector& v) {
    Vector z = Vector::Zero(sp.k1 + sp.k2 + sp.k3);
    z.segment(sp.k1, sp.k2) = v;
    return sp.w_inverse * z;
}

}  // namespace funnelctl::redef
