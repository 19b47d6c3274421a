#pragma once

#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "funnelctl/lti/normal_form.hpp"
#include "funnelctl/numlin/schur.hpp"

namespace funnelctl::redef {

/// Block-triangular isolation of the not-strictly-stable part of the internal
/// dynamics:
///   T Q T^{-1} = [Qhat1 Qhat2; 0 Qtilde],  T P = [Phat; Ptilde],
/// with sigma(Qhat1) in the open left half-plane and the Krylov matrix
/// [Ptilde, Qtilde Ptilde, ..., Qtilde^{ell-1} Ptilde] invertible. The basis
/// of the isolated block is normalized so that this Krylov matrix equals I
/// (krylov_cond records its condition number before normalization).
struct UnstableIsolation {
    Index ell = 0;
    Index k_dim = 0;  // dimension of the remaining (stable) part
    Index m = 0;
    Matrix t_transform;  // T
    Matrix t_inverse;
    Matrix q_hat1, q_hat2;
    Matrix q_tilde;
    Matrix p_hat, p_tilde;
    double krylov_cond = 1.0;
    std::vector<std::string> search_log;
};

struct IsolationOptions {
    Tolerances tol;
    Index combo_cap = 64;       // filler-subset attempts per ell
    double horizon = 10.0;      // sampling window for the disturbance-image check
    Index grid_points = 201;
    std::function<Vector(double)> internal_disturbance;  // d_eta(t); empty means zero
};

namespace detail {

// enumerate subsets of `sizes` (ordered) with given total, include-first DFS
inline void subset_sums(const std::vector<Index>& sizes, Index total,
                        std::vector<std::vector<size_t>>& out, Index cap) {
    std::vector<size_t> cur;
    std::function<void(size_t, Index)> rec = [&](size_t pos, Index remaining) {
        if (static_cast<Index>(out.size()) >= cap) return;
        if (remaining == 0) {
            out.push_back(cur);
            return;
        }
        if (pos >= sizes.size()) return;
        if (sizes[pos] <= remaining) {
            cur.push_back(pos);
            rec(pos + 1, remaining - sizes[pos]);
            cur.pop_back();
        }
        rec(pos + 1, remaining);
    };
    rec(0, total);
}

}  // namespace detail

/// Search the smallest ell such that a conjugate-closed eigenvalue selection of
/// size ell*m containing every closed-right-half-plane eigenvalue of Q admits
/// the isolation above. Returns ell = 0 (identity transform, empty isolated
/// block) when Q is already strictly stable.
inline UnstableIsolation find_unstable_isolation(const lti::NormalForm& nf,
                                                 const IsolationOptions& opts = {}) {
    const Index nq = nf.internal_dim();
    const Index m = nf.m;
    UnstableIsolation iso;
    iso.m = m;

    const double tol_axis = opts.tol.axis * std::max(1.0, nf.q.norm());

    if (nq == 0) {
        iso.ell = 0;
        iso.k_dim = 0;
        iso.t_transform = iso.t_inverse = Matrix::Identity(0, 0);
        iso.q_hat1 = nf.q;
        iso.q_tilde = Matrix(0, 0);
        iso.p_hat = Matrix(0, m);
        iso.p_tilde = Matrix(0, m);
        return iso;
    }

    numlin::SchurDecomposition base = numlin::real_schur(nf.q);

    // one representative eigenvalue per block
    std::vector<Complex> block_eig(base.block_start.size());
    std::vector<Index> block_sz = base.block_size;
    std::vector<bool> mandatory(base.block_start.size(), false);
    Index mandatory_size = 0;
    for (size_t bi = 0; bi < base.block_start.size(); ++bi) {
        Complex l = base.eigenvalues[static_cast<size_t>(base.block_start[bi])];
        if (l.imag() < 0.0) l = std::conj(l);
        block_eig[bi] = l;
        if (l.real() >= -tol_axis) {
            mandatory[bi] = true;
            mandatory_size += block_sz[bi];
        }
    }

    if (mandatory_size == 0) {
        iso.ell = 0;
        iso.k_dim = nq;
        iso.t_transform = iso.t_inverse = Matrix::Identity(nq, nq);
        iso.q_hat1 = nf.q;
        iso.q_hat2 = Matrix(nq, 0);
        iso.q_tilde = Matrix(0, 0);
        iso.p_hat = nf.p;
        iso.p_tilde = Matrix(0, m);
        return iso;
    }

    // stable filler blocks ordered by ascending distance to the axis
    std::vector<size_t> stable_order;
    for (size_t bi = 0; bi < block_eig.size(); ++bi)
        if (!mandatory[bi]) stable_order.push_back(bi);
    std::sort(stable_order.begin(), stable_order.end(), [&](size_t a, size_t b) {
        double ra = std::abs(block_eig[a].real()), rb = std::abs(block_eig[b].real());
        if (ra != rb) return ra < rb;
        return a < b;
    });

    bool disturbance_blocked = false;
    const Index ell_max = nq / m;
    for (Index ell = 1; ell <= ell_max; ++ell) {
        const Index lm = ell * m;
        const Index need = lm - mandatory_size;
        if (need < 0) {
            iso.search_log.push_back("ell=" + std::to_string(ell) +
                                     ": closed-right-half-plane eigenvalue set (size " +
                                     std::to_string(mandatory_size) + ") exceeds ell*m");
            continue;
        }

        std::vector<Index> filler_sizes;
        for (size_t idx : stable_order) filler_sizes.push_back(block_sz[idx]);
        std::vector<std::vector<size_t>> combos;
        detail::subset_sums(filler_sizes, need, combos, opts.combo_cap);
        if (combos.empty()) {
            std::ostringstream os;
            os << "ell=" << ell << ": no conjugate-closed selection of size " << lm
               << " (mandatory " << mandatory_size << ", filler gap " << need << ")";
            iso.search_log.push_back(os.str());
            continue;
        }

        for (const auto& combo : combos) {
            std::vector<bool> selected = mandatory;
            for (size_t ci : combo) selected[stable_order[ci]] = true;

            numlin::SchurDecomposition d = base;
            // rank 0: keep in the leading (stable) part; rank 1: isolate trailing
            std::vector<int> ranks;
            for (size_t bi = 0; bi < selected.size(); ++bi) ranks.push_back(selected[bi] ? 1 : 0);
            try {
                numlin::reorder_schur_by_block(d, ranks, opts.tol.swap_sep);
            } catch (const SwapFailure& e) {
                iso.search_log.push_back("ell=" + std::to_string(ell) + ": " + e.what());
                continue;
            }

            const Index k = nq - lm;
            Matrix t_orth = d.orthogonal.transpose();
            Matrix tq = d.quasi_triangular;  // = T Q T^{-1}
            Matrix tp = t_orth * nf.p;

            Matrix q_tilde = tq.block(k, k, lm, lm);
            Matrix p_tilde = tp.bottomRows(lm);

            // strict stability of the remaining part
            bool stable_ok = true;
            if (k > 0) {
                auto eigs = numlin::eigenvalues_of(tq.topLeftCorner(k, k));
                for (const auto& l : eigs)
                    if (l.real() >= -tol_axis) stable_ok = false;
            }
            if (!stable_ok) {
                iso.search_log.push_back("ell=" + std::to_string(ell) +
                                         ": leftover block not strictly stable");
                continue;
            }

            Matrix krylov(lm, lm);
            Matrix col = p_tilde;
            for (Index j = 0; j < ell; ++j) {
                krylov.middleCols(j * m, m) = col;
                col = q_tilde * col;
            }
            double kc = cond2(krylov);
            if (!(kc <= 1.0 / opts.tol.inv)) {
                std::ostringstream os;
                os << "ell=" << ell << ": Krylov matrix ill-conditioned (cond " << kc << ")";
                iso.search_log.push_back(os.str());
                continue;
            }

            // normalize the isolated block so the Krylov matrix becomes I
            Eigen::FullPivLU<Matrix> klu(krylov);
            Matrix mnorm = klu.inverse();
            Matrix t_full = t_orth;
            t_full.bottomRows(lm) = mnorm * t_orth.bottomRows(lm);
            q_tilde = mnorm * q_tilde * krylov;
            p_tilde = Matrix::Zero(lm, m);
            p_tilde.topRows(m) = Matrix::Identity(m, m);
            Matrix q_hat2 = (k > 0) ? Matrix(tq.block(0, k, k, lm) * krylov) : Matrix(0, lm);

            // fix the sign ambiguity of the stable-part rows
            for (Index i = 0; i < k; ++i) {
                Index imax;
                t_full.row(i).cwiseAbs().maxCoeff(&imax);
                if (t_full(i, imax) < 0.0) {
                    t_full.row(i) = -t_full.row(i);
                    q_hat2.row(i) = -q_hat2.row(i);
                    tq.row(i) = -tq.row(i);
                    tq.col(i) = -tq.col(i);
                    tp.row(i) = -tp.row(i);
                }
            }

            // disturbance must enter the isolated block through im(Ptilde) only
            if (opts.internal_disturbance) {
                double worst = 0.0;
                for (Index gi = 0; gi < opts.grid_points; ++gi) {
                    double t = opts.horizon * static_cast<double>(gi) /
                               static_cast<double>(opts.grid_points - 1);
                    Vector v = t_full.bottomRows(lm) * opts.internal_disturbance(t);
                    if (lm > m) worst = std::max(worst, v.tail(lm - m).norm());
                }
                if (worst > opts.tol.zero * std::max(1.0, t_full.norm())) {
                    std::ostringstream os;
                    os << "ell=" << ell << ": disturbance leaves im(Ptilde), residual " << worst;
                    iso.search_log.push_back(os.str());
                    disturbance_blocked = true;
                    continue;
                }
            }

            iso.ell = ell;
            iso.k_dim = k;
            iso.t_transform = t_full;
            iso.t_inverse = t_full.fullPivLu().inverse();
            iso.q_hat1 = (k > 0) ? Matrix(tq.topLeftCorner(k, k)) : Matrix(0, 0);
            iso.q_hat2 = q_hat2;
            iso.q_tilde = q_tilde;
            iso.p_hat = (k > 0) ? Matrix(tp.topRows(k)) : Matrix(0, m);
            iso.p_tilde = p_tilde;
            iso.krylov_cond = kc;
            return iso;
        }
    }

    std::string log;
    for (const auto& line : iso.search_log) log += "\n  " + line;
    if (disturbance_blocked)
        throw DisturbanceImageViolation("no admissible isolation: the disturbance enters the isolated block" + log);
    throw NoDecomposition("no block-triangular isolation up to ell=" + std::to_string(ell_max) + log);
}

}  // namespace funnelctl::redef
