#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "funnelctl/core.hpp"

namespace funnelctl::numlin {

/// Real Schur form m = orthogonal * quasi_triangular * orthogonal^T with
/// 1x1 / 2x2 diagonal blocks; 2x2 blocks carry complex-conjugate pairs.
struct SchurDecomposition {
    Matrix orthogonal;
    Matrix quasi_triangular;
    ComplexVector eigenvalues;        // one entry per diagonal position
    std::vector<Index> block_of;      // block id per diagonal position
    std::vector<Index> block_start;   // per block
    std::vector<Index> block_size;    // per block (1 or 2)

    Index blocks() const { return static_cast<Index>(block_start.size()); }
};

struct SpectrumClassification {
    std::vector<Index> stable;      // Re < -tol_axis
    std::vector<Index> antistable;  // Re > +tol_axis
    std::vector<Index> critical;    // |Re| <= tol_axis
};

inline SpectrumClassification classify_spectrum(const ComplexVector& eigs, double tol_axis) {
    SpectrumClassification c;
    for (Index i = 0; i < static_cast<Index>(eigs.size()); ++i) {
        double re = eigs[static_cast<size_t>(i)].real();
        if (re < -tol_axis)
            c.stable.push_back(i);
        else if (re > tol_axis)
            c.antistable.push_back(i);
        else
            c.critical.push_back(i);
    }
    return c;
}

namespace detail {

// Zero out sub-quasi-diagonal noise so block boundaries are exact zeros.
inline void clean_lower(Matrix& t) {
    const Index n = t.rows();
    for (Index j = 0; j < n; ++j)
        for (Index i = j + 2; i < n; ++i) t(i, j) = 0.0;
    for (Index i = 0; i + 1 < n; ++i) {
        double scale = std::abs(t(i, i)) + std::abs(t(i + 1, i + 1));
        if (std::abs(t(i + 1, i)) <= 1e-14 * std::max(1.0, scale)) t(i + 1, i) = 0.0;
    }
    // a 2x2 block cannot start inside another one
    for (Index i = 0; i + 2 < n; ++i)
        if (t(i + 1, i) != 0.0 && t(i + 2, i + 1) != 0.0) t(i + 2, i + 1) = 0.0;
}

inline std::pair<Complex, Complex> eig2x2(double a, double b, double c, double d) {
    double tr = a + d, det = a * d - b * c;
    double disc = tr * tr - 4.0 * det;
    if (disc >= 0.0) {
        double s = std::sqrt(disc);
        double l1 = (tr >= 0.0) ? (tr + s) / 2.0 : (tr - s) / 2.0;
        double l2 = (l1 != 0.0) ? det / l1 : (tr - std::copysign(s, tr)) / 2.0;
        return {Complex(l1, 0.0), Complex(l2, 0.0)};
    }
    double im = std::sqrt(-disc) / 2.0;
    return {Complex(tr / 2.0, im), Complex(tr / 2.0, -im)};
}

// Apply a Givens rotation G = [[cs, sn], [-sn, cs]] acting on rows/cols (i, i+1):
// T <- G_emb^T? We use: T <- G * T (rows), T <- T * G^T (cols), U <- U * G^T.
// Here G is applied as a similarity T <- G T G^T with m <- U T U^T preserved via
// U <- U G^T.
inline void apply_rotation(Matrix& t, Matrix& u, Index i, double cs, double sn) {
    const Index n = t.rows();
    for (Index j = 0; j < n; ++j) {  // rows
        double x = t(i, j), y = t(i + 1, j);
        t(i, j) = cs * x + sn * y;
        t(i + 1, j) = -sn * x + cs * y;
    }
    for (Index j = 0; j < n; ++j) {  // cols
        double x = t(j, i), y = t(j, i + 1);
        t(j, i) = cs * x + sn * y;
        t(j, i + 1) = -sn * x + cs * y;
    }
    for (Index j = 0; j < u.rows(); ++j) {
        double x = u(j, i), y = u(j, i + 1);
        u(j, i) = cs * x + sn * y;
        u(j, i + 1) = -sn * x + cs * y;
    }
}

// Standardize the 2x2 block at position i: triangularize it if its eigenvalues
// are real, otherwise rotate to the form [[p, b], [c, p]] with b*c < 0.
inline void standardize_2x2(Matrix& t, Matrix& u, Index i) {
    double a = t(i, i), b = t(i, i + 1), c = t(i + 1, i), d = t(i + 1, i + 1);
    if (c == 0.0) return;
    double tr = a + d, det = a * d - b * c;
    double disc = tr * tr - 4.0 * det;
    if (disc >= 0.0) {
        // real eigenvalues: align the dominant eigenvector with e1
        double s = std::sqrt(disc);
        double l1 = (tr >= 0.0) ? (tr + s) / 2.0 : (tr - s) / 2.0;
        double v1, v2;
        if (std::abs(b) + std::abs(l1 - a) >= std::abs(l1 - d) + std::abs(c)) {
            v1 = b;
            v2 = l1 - a;
        } else {
            v1 = l1 - d;
            v2 = c;
        }
        double nv = std::hypot(v1, v2);
        if (nv == 0.0) return;
        apply_rotation(t, u, i, v1 / nv, v2 / nv);
    } else {
        // complex pair: equalize the diagonal
        double theta = 0.5 * std::atan2(-(a - d), b + c);
        apply_rotation(t, u, i, std::cos(theta), std::sin(theta));
        double p = (t(i, i) + t(i + 1, i + 1)) / 2.0;
        t(i, i) = t(i + 1, i + 1) = p;
    }
    t(i + 1, i) = (disc >= 0.0) ? 0.0 : t(i + 1, i);
}

// Swap adjacent diagonal blocks at (s, p) and (s+p, q) via an orthogonal
// similarity. Throws SwapFailure when the blocks are numerically inseparable.
inline void swap_adjacent_blocks(Matrix& t, Matrix& u, Index s, Index p, Index q,
                                 double sep_tol) {
    const Index n = t.rows();
    Matrix a = t.block(s, s, p, p);
    Matrix c = t.block(s + p, s + p, q, q);
    Matrix b = t.block(s, s + p, p, q);

    // A X - X C = -B   (Kronecker form, pq <= 4)
    Matrix k = Matrix::Zero(p * q, p * q);
    for (Index j = 0; j < q; ++j)
        for (Index i = 0; i < p; ++i) {
            for (Index l = 0; l < p; ++l) k(j * p + i, j * p + l) += a(i, l);
            for (Index l = 0; l < q; ++l) k(j * p + i, l * p + i) -= c(l, j);  // -(C^T (x) I)
        }
    Eigen::FullPivLU<Matrix> lu(k);
    double kmax = k.cwiseAbs().maxCoeff();
    if (!lu.isInvertible() ||
        std::abs(lu.matrixLU().diagonal().cwiseAbs().minCoeff()) < sep_tol * std::max(1.0, kmax)) {
        std::ostringstream os;
        os << "Schur block swap failed: blocks at " << s << " (size " << p << ") and " << s + p
           << " (size " << q << ") have eigenvalue separation below " << sep_tol;
        throw SwapFailure(os.str());
    }
    Vector bv(p * q);
    for (Index j = 0; j < q; ++j)
        for (Index i = 0; i < p; ++i) bv(j * p + i) = -b(i, j);
    Vector xv = lu.solve(bv);

    Matrix m(p + q, q);
    for (Index j = 0; j < q; ++j)
        for (Index i = 0; i < p; ++i) m(i, j) = xv(j * p + i);
    m.block(p, 0, q, q) = Matrix::Identity(q, q);

    Eigen::HouseholderQR<Matrix> qr(m);
    Matrix g = qr.householderQ();

    t.middleRows(s, p + q) = (g.transpose() * t.middleRows(s, p + q)).eval();
    t.middleCols(s, p + q) = (t.middleCols(s, p + q) * g).eval();
    u.middleCols(s, p + q) = (u.middleCols(s, p + q) * g).eval();

    double resid = t.block(s + q, s, p, q).norm();
    double scale = std::max(1.0, t.norm());
    if (resid > 1e-8 * scale) {
        std::ostringstream os;
        os << "Schur block swap left residual " << resid << " at blocks (" << s << "," << s + p
           << ")";
        throw SwapFailure(os.str());
    }
    t.block(s + q, s, p, q).setZero();
    if (n > s + p + q) t.block(s + p + q, s, n - s - p - q, p + q).setZero();
    if (q == 2) standardize_2x2(t, u, s);
    if (p == 2) standardize_2x2(t, u, s + q);
}

inline void scan_blocks(const Matrix& t, std::vector<Index>& start, std::vector<Index>& size) {
    start.clear();
    size.clear();
    const Index n = t.rows();
    Index i = 0;
    while (i < n) {
        Index p = (i + 1 < n && t(i + 1, i) != 0.0) ? 2 : 1;
        start.push_back(i);
        size.push_back(p);
        i += p;
    }
}

inline Complex block_eig(const Matrix& t, Index s, Index p) {
    if (p == 1) return Complex(t(s, s), 0.0);
    return eig2x2(t(s, s), t(s, s + 1), t(s + 1, s), t(s + 1, s + 1)).first;
}

}  // namespace detail

/// Plain real Schur decomposition (no ordering), 2x2 blocks standardized.
inline SchurDecomposition real_schur(const Matrix& m) {
    if (m.rows() != m.cols()) throw NumericalError("real_schur: matrix must be square");
    if (!all_finite(m)) throw NumericalError("real_schur: non-finite entries");
    SchurDecomposition d;
    const Index n = m.rows();
    if (n == 0) {
        d.orthogonal = d.quasi_triangular = Matrix(0, 0);
        return d;
    }
    Eigen::RealSchur<Matrix> schur(m);
    if (schur.info() != Eigen::Success) throw NumericalError("real_schur: iteration failed");
    d.quasi_triangular = schur.matrixT();
    d.orthogonal = schur.matrixU();
    detail::clean_lower(d.quasi_triangular);
    detail::scan_blocks(d.quasi_triangular, d.block_start, d.block_size);
    for (size_t bi = 0; bi < d.block_start.size(); ++bi) {
        if (d.block_size[bi] == 2)
            detail::standardize_2x2(d.quasi_triangular, d.orthogonal, d.block_start[bi]);
    }
    detail::clean_lower(d.quasi_triangular);
    detail::scan_blocks(d.quasi_triangular, d.block_start, d.block_size);

    d.eigenvalues.resize(static_cast<size_t>(n));
    d.block_of.resize(static_cast<size_t>(n));
    for (size_t bi = 0; bi < d.block_start.size(); ++bi) {
        Index s = d.block_start[bi], p = d.block_size[bi];
        if (p == 1) {
            d.eigenvalues[static_cast<size_t>(s)] = Complex(d.quasi_triangular(s, s), 0.0);
            d.block_of[static_cast<size_t>(s)] = static_cast<Index>(bi);
        } else {
            auto [l1, l2] = detail::eig2x2(d.quasi_triangular(s, s), d.quasi_triangular(s, s + 1),
                                           d.quasi_triangular(s + 1, s),
                                           d.quasi_triangular(s + 1, s + 1));
            d.eigenvalues[static_cast<size_t>(s)] = l1;
            d.eigenvalues[static_cast<size_t>(s + 1)] = l2;
            d.block_of[static_cast<size_t>(s)] = d.block_of[static_cast<size_t>(s + 1)] =
                static_cast<Index>(bi);
        }
    }
    return d;
}

/// Reorder an existing Schur form so blocks are sorted ascending by the given
/// per-block cluster ranks (aligned with the current block order; stable order
/// within equal ranks).
inline void reorder_schur_by_block(SchurDecomposition& d, std::vector<int> ranks, double sep_tol) {
    Matrix& t = d.quasi_triangular;
    Matrix& u = d.orthogonal;
    std::vector<Index> start, size;
    detail::scan_blocks(t, start, size);
    if (ranks.size() != start.size())
        throw NumericalError("reorder_schur_by_block: rank list does not match block count");
    // bubble adjacent out-of-order blocks (each exchange is orthogonal)
    bool moved = true;
    while (moved) {
        moved = false;
        for (size_t i = 0; i + 1 < start.size(); ++i) {
            if (ranks[i] > ranks[i + 1]) {
                detail::swap_adjacent_blocks(t, u, start[i], size[i], size[i + 1], sep_tol);
                std::swap(ranks[i], ranks[i + 1]);
                Index p = size[i], q = size[i + 1];
                size[i] = q;
                size[i + 1] = p;
                start[i + 1] = start[i] + q;
                moved = true;
            }
        }
    }
    detail::clean_lower(t);
    detail::scan_blocks(t, d.block_start, d.block_size);
    const Index n = t.rows();
    d.eigenvalues.resize(static_cast<size_t>(n));
    d.block_of.resize(static_cast<size_t>(n));
    for (size_t bi = 0; bi < d.block_start.size(); ++bi) {
        Index s = d.block_start[bi], p = d.block_size[bi];
        if (p == 1) {
            d.eigenvalues[static_cast<size_t>(s)] = Complex(t(s, s), 0.0);
            d.block_of[static_cast<size_t>(s)] = static_cast<Index>(bi);
        } else {
            auto [l1, l2] = detail::eig2x2(t(s, s), t(s, s + 1), t(s + 1, s), t(s + 1, s + 1));
            d.eigenvalues[static_cast<size_t>(s)] = l1;
            d.eigenvalues[static_cast<size_t>(s + 1)] = l2;
            d.block_of[static_cast<size_t>(s)] = d.block_of[static_cast<size_t>(s + 1)] =
                static_cast<Index>(bi);
        }
    }
}

/// Reorder blocks by a rank function on a representative eigenvalue per block
/// (the one with nonnegative imaginary part).
inline void reorder_schur(SchurDecomposition& d, const std::function<int(Complex)>& rank,
                          double sep_tol) {
    std::vector<Index> start, size;
    detail::scan_blocks(d.quasi_triangular, start, size);
    std::vector<int> ranks(start.size());
    for (size_t i = 0; i < start.size(); ++i) {
        Complex l = detail::block_eig(d.quasi_triangular, start[i], size[i]);
        if (l.imag() < 0.0) l = std::conj(l);
        ranks[i] = rank(l);
    }
    reorder_schur_by_block(d, std::move(ranks), sep_tol);
}

/// Ordered Schur decomposition: selected eigenvalues occupy the leading
/// diagonal blocks. Verifies the reconstruction residual.
inline SchurDecomposition ordered_schur(const Matrix& m,
                                        const std::function<bool(Complex)>& select,
                                        const Tolerances& tol = {}) {
    SchurDecomposition d = real_schur(m);
    reorder_schur(
        d, [&select](Complex l) { return select(l) ? 0 : 1; }, tol.swap_sep);
    double scale = std::max(1.0, m.norm());
    double resid =
        (d.orthogonal * d.quasi_triangular * d.orthogonal.transpose() - m).norm() / scale;
    if (resid > tol.recon)
        throw NumericalError("ordered_schur: reconstruction residual " + std::to_string(resid));
    return d;
}

/// Number of leading diagonal positions whose eigenvalues satisfy the predicate
/// used for the ordering (counts whole blocks).
inline Index leading_count(const SchurDecomposition& d, const std::function<bool(Complex)>& select) {
    Index count = 0;
    for (size_t bi = 0; bi < d.block_start.size(); ++bi) {
        Complex l = d.eigenvalues[static_cast<size_t>(d.block_start[bi])];
        if (l.imag() < 0.0) l = std::conj(l);
        if (!select(l)) break;
        count += d.block_size[bi];
    }
    return count;
}

inline ComplexVector eigenvalues_of(const Matrix& m) {
    return real_schur(m).eigenvalues;
}

}  // namespace funnelctl::numlin
