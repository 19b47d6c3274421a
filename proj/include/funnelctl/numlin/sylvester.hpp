#pragma once

#include <cmath>
#include <sstream>

#include "funnelctl/numlin/schur.hpp"

namespace funnelctl::numlin {

/// Solve the Sylvester equation a*X - X*b = c by Bartels-Stewart on the real
/// Schur forms of a and b. Requires sigma(a) and sigma(b) to be disjoint.
inline Matrix solve_sylvester(const Matrix& a, const Matrix& b, const Matrix& c,
                              const Tolerances& tol = {}) {
    const Index na = a.rows(), nb = b.rows();
    if (a.rows() != a.cols() || b.rows() != b.cols() || c.rows() != na || c.cols() != nb)
        throw NumericalError("solve_sylvester: dimension mismatch");
    if (na == 0 || nb == 0) return Matrix::Zero(na, nb);

    SchurDecomposition sa = real_schur(a);
    SchurDecomposition sb = real_schur(b);

    double scale = 1.0;
    for (const auto& la : sa.eigenvalues) scale = std::max(scale, std::abs(la));
    for (const auto& lb : sb.eigenvalues) scale = std::max(scale, std::abs(lb));
    double sep = std::numeric_limits<double>::infinity();
    for (const auto& la : sa.eigenvalues)
        for (const auto& lb : sb.eigenvalues) sep = std::min(sep, std::abs(la - lb));
    if (sep < tol.swap_sep * scale * 100.0) {
        std::ostringstream os;
        os << "solve_sylvester: spectra overlap within tolerance (separation " << sep << ")";
        throw SpectraNotSeparated(os.str());
    }

    const Matrix& ta = sa.quasi_triangular;
    const Matrix& tb = sb.quasi_triangular;
    Matrix rhs = sa.orthogonal.transpose() * c * sb.orthogonal;
    Matrix y = Matrix::Zero(na, nb);

    const auto& arow = sa.block_start;
    const auto& asz = sa.block_size;
    const auto& bcol = sb.block_start;
    const auto& bsz = sb.block_size;

    for (size_t kb = 0; kb < bcol.size(); ++kb) {
        const Index sk = bcol[kb], qk = bsz[kb];
        for (size_t ib = arow.size(); ib-- > 0;) {
            const Index si = arow[ib], pi = asz[ib];
            Matrix r = rhs.block(si, sk, pi, qk);
            if (si + pi < na)
                r -= ta.block(si, si + pi, pi, na - si - pi) * y.block(si + pi, sk, na - si - pi, qk);
            if (sk > 0) r += y.block(si, 0, pi, sk) * tb.block(0, sk, sk, qk);

            // small Sylvester: Ta_ii * Y_ik - Y_ik * Tb_kk = r, size pi*qk <= 4
            Matrix k = Matrix::Zero(pi * qk, pi * qk);
            for (Index j = 0; j < qk; ++j)
                for (Index i = 0; i < pi; ++i) {
                    for (Index l = 0; l < pi; ++l) k(j * pi + i, j * pi + l) += ta(si + i, si + l);
                    for (Index l = 0; l < qk; ++l) k(j * pi + i, l * pi + i) -= tb(sk + l, sk + j);
                }
            Vector rv(pi * qk);
            for (Index j = 0; j < qk; ++j)
                for (Index i = 0; i < pi; ++i) rv(j * pi + i) = r(i, j);
            Eigen::FullPivLU<Matrix> lu(k);
            if (!lu.isInvertible())
                throw SpectraNotSeparated("solve_sylvester: singular diagonal sub-problem");
            Vector yv = lu.solve(rv);
            for (Index j = 0; j < qk; ++j)
                for (Index i = 0; i < pi; ++i) y(si + i, sk + j) = yv(j * pi + i);
        }
    }

    Matrix x = sa.orthogonal * y * sb.orthogonal.transpose();
    double resid = (a * x - x * b - c).norm();
    double bound = tol.sylvester * ((a.norm() + b.norm()) * x.norm() + c.norm());
    if (resid > std::max(bound, 1e-300))
        throw NumericalError("solve_sylvester: residual " + std::to_string(resid) +
                             " exceeds tolerance");
    return x;
}

}  // namespace funnelctl::numlin
