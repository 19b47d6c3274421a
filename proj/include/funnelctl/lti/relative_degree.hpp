#pragma once

#include <cmath>
#include <sstream>
#include <vector>

#include "funnelctl/lti/system.hpp"

namespace funnelctl::lti {

struct RelativeDegreeCertificate {
    Index r = 0;
    std::vector<double> markov_norms;  // ||C A^k B||, k = 0..r-1
    std::vector<double> scales;        // ||C|| ||A||^k ||B||
    double gamma_cond = 0.0;
    Matrix gamma;
};

/// Smallest r with C A^k B = 0 (k < r-1, relative to a scale-aware band) and
/// C A^{r-1} B invertible with condition number <= 1/tol_inv.
inline RelativeDegreeCertificate relative_degree(const LtiSystem& sys, Index r_max = 0,
                                                 double tol_zero = 1e-9, double tol_inv = 1e-9) {
    const Index n = sys.n(), m = sys.m();
    if (r_max <= 0) r_max = n / m;
    RelativeDegreeCertificate cert;
    const double cn = sys.c.norm(), bn = sys.b.norm(), an = sys.a.norm();

    Matrix cak = sys.c;  // C A^k
    double apow = 1.0;
    for (Index k = 0; k < r_max; ++k) {
        Matrix markov = cak * sys.b;
        double scale = std::max(cn * apow * bn, 1e-300);
        cert.markov_norms.push_back(markov.norm());
        cert.scales.push_back(scale);
        if (markov.norm() > tol_zero * scale) {
            double cnd = cond2(markov);
            if (!(cnd <= 1.0 / tol_inv)) {
                std::ostringstream os;
                os << "Markov parameter C A^" << k << " B is nonzero but near-singular (cond "
                   << cnd << ")";
                throw NearSingularMarkovParameter(os.str());
            }
            cert.r = k + 1;
            cert.gamma = markov;
            cert.gamma_cond = cnd;
            return cert;
        }
        cak = cak * sys.a;
        apow *= std::max(an, 1e-300);
    }
    std::ostringstream os;
    os << "no strict relative degree r <= " << r_max << " (all Markov parameters within the zero band)";
    throw NoStrictRelativeDegree(os.str());
}

/// Sampled check of C A^k d(t) = 0 for k = 0..r-2. Returns a certificate with
/// the per-k maximal residual; never throws.
inline Certificate disturbance_matching(const LtiSystem& sys, Index r, double horizon = 10.0,
                                        Index grid_points = 201, double tol_zero = 1e-9) {
    Certificate cert;
    cert.name = "disturbance-matching";
    cert.pass = true;
    Matrix cak = sys.c;
    for (Index k = 0; k + 1 < r; ++k) {
        double worst = 0.0;
        for (Index i = 0; i < grid_points; ++i) {
            double t = horizon * static_cast<double>(i) / static_cast<double>(grid_points - 1);
            worst = std::max(worst, (cak * sys.disturbance(t)).norm());
        }
        double scale = std::max(1.0, cak.norm() * std::max(1.0, sys.disturbance.sup_bound));
        cert.metrics["max_residual_k" + std::to_string(k)] = worst;
        if (worst > tol_zero * scale) cert.pass = false;
        cak = cak * sys.a;
    }
    if (!cert.pass) cert.detail = "disturbance enters the output chain before the input does";
    return cert;
}

}  // namespace funnelctl::lti
