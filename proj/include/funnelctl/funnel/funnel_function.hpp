#pragma once

#include <cmath>
#include <vector>

#include "funnelctl/core.hpp"

namespace funnelctl::funnel {

/// Funnel boundary psi(t) = a e^{-b t} + c with gain function phi = 1/psi.
/// All derivatives are analytic; phi is positive with liminf phi = 1/c > 0
/// and finite phi(0).
class FunnelFunction {
public:
    FunnelFunction() = default;

    static FunnelFunction exponential(double a, double b, double c) {
        if (c <= 0.0) throw ConfigError("funnel: asymptotic width must be positive");
        if (a < 0.0 || b < 0.0) throw ConfigError("funnel: transient shape must be nonnegative");
        FunnelFunction f;
        f.a_ = a;
        f.b_ = b;
        f.c_ = c;
        return f;
    }

    static FunnelFunction constant(double c) { return exponential(0.0, 0.0, c); }

    double psi(double t, Index order = 0) const {
        if (order == 0) return a_ * std::exp(-b_ * t) + c_;
        return a_ * std::pow(-b_, static_cast<double>(order)) * std::exp(-b_ * t);
    }

    /// phi^{(0..upto)}(t) by the reciprocal recursion phi*psi = 1.
    void phi_derivs(double t, Index upto, std::vector<double>& out) const {
        out.assign(static_cast<size_t>(upto) + 1, 0.0);
        const double p0 = psi(t, 0);
        out[0] = 1.0 / p0;
        for (Index j = 1; j <= upto; ++j) {
            double acc = 0.0;
            for (Index l = 0; l < j; ++l)
                acc += static_cast<double>(binomial(j, l)) * out[static_cast<size_t>(l)] *
                       psi(t, j - l);
            out[static_cast<size_t>(j)] = -acc / p0;
        }
    }

    double phi(double t, Index order = 0) const {
        std::vector<double> d;
        phi_derivs(t, order, d);
        return d[static_cast<size_t>(order)];
    }

    double inf_psi() const { return c_; }        // over [0, inf)
    double sup_psi() const { return a_ + c_; }
    double liminf_phi() const { return 1.0 / (a_ > 0.0 && b_ == 0.0 ? a_ + c_ : c_); }

    double shape_a() const { return a_; }
    double decay_b() const { return b_; }
    double width_c() const { return c_; }

private:
    double a_ = 0.0, b_ = 0.0, c_ = 1.0;
};

/// Funnel levels phi_0..phi_{rho-1}; level i needs derivatives up to rho - i.
struct FunnelSpec {
    std::vector<FunnelFunction> levels;

    Index rho() const { return static_cast<Index>(levels.size()); }

    const FunnelFunction& level(Index i) const { return levels[static_cast<size_t>(i)]; }

    void validate(Index expected_rho) const {
        if (rho() != expected_rho)
            throw ConfigError("funnel: expected " + std::to_string(expected_rho) +
                              " levels, got " + std::to_string(rho()));
    }

    /// Sampled audit of positivity and derivative boundedness per level.
    Certificate audit(double horizon, Index pts = 101) const {
        Certificate cert;
        cert.name = "funnel-class";
        cert.pass = true;
        for (Index i = 0; i < rho(); ++i) {
            const Index orders = rho() - i;
            double min_phi = std::numeric_limits<double>::infinity();
            double max_deriv = 0.0;
            std::vector<double> d;
            for (Index g = 0; g < pts; ++g) {
                double t = horizon * static_cast<double>(g) / static_cast<double>(pts - 1);
                level(i).phi_derivs(t, orders, d);
                min_phi = std::min(min_phi, d[0]);
                for (Index j = 0; j <= orders; ++j)
                    max_deriv = std::max(max_deriv, std::abs(d[static_cast<size_t>(j)]));
            }
            cert.metrics["min_phi_" + std::to_string(i)] = min_phi;
            cert.metrics["max_deriv_" + std::to_string(i)] = max_deriv;
            if (!(min_phi > 0.0) || !std::isfinite(max_deriv)) cert.pass = false;
        }
        return cert;
    }
};

}  // namespace funnelctl::funnel
