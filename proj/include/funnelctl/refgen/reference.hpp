#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "funnelctl/numlin/expm.hpp"
#include "funnelctl/numlin/schur.hpp"

namespace funnelctl::refgen {

enum class ReferenceKind { analytic, exosystem, sampled };

/// Autonomous linear signal generator w' = A_e w, y_ref = C_e w.
/// Spectrum must lie in the closed left half-plane with semisimple
/// axis eigenvalues (so the emitted signal and its derivatives stay bounded).
struct Exosystem {
    Matrix a_e;
    Matrix c_e;
    Vector w0;

    void validate(double tol_axis = 1e-9) const {
        if (a_e.rows() != a_e.cols() || c_e.cols() != a_e.rows() || w0.size() != a_e.rows())
            throw ConfigError("exosystem: dimension mismatch");
        const double band = tol_axis * std::max(1.0, a_e.norm());
        auto eigs = numlin::eigenvalues_of(a_e);
        for (const auto& l : eigs) {
            if (l.real() > band)
                throw ConfigError("exosystem: eigenvalue with positive real part");
            if (std::abs(l.real()) <= band) {
                // semisimple check: geometric multiplicity == algebraic multiplicity
                Index alg = 0;
                for (const auto& l2 : eigs)
                    if (std::abs(l2 - l) <= 1e-7 * std::max(1.0, std::abs(l))) ++alg;
                Eigen::MatrixXcd shifted = a_e.cast<Complex>();
                shifted.diagonal().array() -= l;
                Eigen::FullPivLU<Eigen::MatrixXcd> lu(shifted);
                lu.setThreshold(1e-9);
                Index geo = a_e.rows() - lu.rank();
                if (geo < alg)
                    throw ConfigError("exosystem: non-semisimple axis eigenvalue (Jordan block)");
            }
        }
    }

    Vector emit(double t, Index order = 0) const {
        Vector w = numlin::expm(a_e, t) * w0;
        Matrix cak = c_e;
        for (Index j = 0; j < order; ++j) cak = cak * a_e;
        return cak * w;
    }
};

/// Reference trajectory with pointwise derivatives up to max_order.
/// support_end, when set, marks the time after which the signal is constant.
struct ReferenceSignal {
    ReferenceKind kind = ReferenceKind::analytic;
    std::function<Vector(double, Index)> evaluator;
    std::optional<double> support_end;
    std::vector<double> breakpoints;  // hard quadrature panel boundaries
    Index dim = 1;
    Index max_order = 0;
    std::shared_ptr<const Exosystem> exo;

    Vector operator()(double t, Index order = 0) const {
        if (order > max_order)
            throw NumericalError("reference derivative order " + std::to_string(order) +
                                 " not available");
        return evaluator(t, order);
    }

    static ReferenceSignal from_exosystem(Exosystem e, Index orders, double tol_axis = 1e-9) {
        e.validate(tol_axis);
        auto shared = std::make_shared<Exosystem>(std::move(e));
        ReferenceSignal s;
        s.kind = ReferenceKind::exosystem;
        s.dim = shared->c_e.rows();
        s.max_order = orders;
        s.exo = shared;
        s.evaluator = [shared](double t, Index order) { return shared->emit(t, order); };
        return s;
    }

    static ReferenceSignal from_function(std::function<Vector(double, Index)> f, Index dim,
                                         Index orders,
                                         std::optional<double> support_end = std::nullopt,
                                         std::vector<double> breakpoints = {}) {
        ReferenceSignal s;
        s.kind = ReferenceKind::analytic;
        s.evaluator = std::move(f);
        s.dim = dim;
        s.max_order = orders;
        s.support_end = support_end;
        s.breakpoints = std::move(breakpoints);
        return s;
    }

    static ReferenceSignal zero(Index dim, Index orders) {
        return from_function([dim](double, Index) { return Vector::Zero(dim); }, dim, orders);
    }

    static ReferenceSignal from_samples(const std::vector<double>& times,
                                        const std::vector<Vector>& values, Index orders);
};

namespace detail {

// Natural cubic spline through (t_i, v_i); evaluates derivatives 0..3
// (orders beyond the cubic degree are zero).
class CubicSpline {
public:
    CubicSpline(std::vector<double> t, std::vector<double> v) : t_(std::move(t)), a_(std::move(v)) {
        const size_t n = t_.size();
        b_.assign(n, 0.0);
        c_.assign(n, 0.0);
        d_.assign(n, 0.0);
        if (n < 3) {
            if (n == 2) b_[0] = (a_[1] - a_[0]) / (t_[1] - t_[0]);
            return;
        }
        std::vector<double> h(n - 1), alpha(n, 0.0), l(n), mu(n), z(n);
        for (size_t i = 0; i + 1 < n; ++i) h[i] = t_[i + 1] - t_[i];
        for (size_t i = 1; i + 1 < n; ++i)
            alpha[i] = 3.0 * (a_[i + 1] - a_[i]) / h[i] - 3.0 * (a_[i] - a_[i - 1]) / h[i - 1];
        l[0] = 1.0;
        mu[0] = z[0] = 0.0;
        for (size_t i = 1; i + 1 < n; ++i) {
            l[i] = 2.0 * (t_[i + 1] - t_[i - 1]) - h[i - 1] * mu[i - 1];
            mu[i] = h[i] / l[i];
            z[i] = (alpha[i] - h[i - 1] * z[i - 1]) / l[i];
        }
        l[n - 1] = 1.0;
        z[n - 1] = c_[n - 1] = 0.0;
        for (size_t j = n - 1; j-- > 0;) {
            c_[j] = z[j] - mu[j] * c_[j + 1];
            b_[j] = (a_[j + 1] - a_[j]) / h[j] - h[j] * (c_[j + 1] + 2.0 * c_[j]) / 3.0;
            d_[j] = (c_[j + 1] - c_[j]) / (3.0 * h[j]);
        }
    }

    double eval(double t, Index order) const {
        size_t i = segment(t);
        double x = t - t_[i];
        switch (order) {
            case 0: return a_[i] + x * (b_[i] + x * (c_[i] + x * d_[i]));
            case 1: return b_[i] + x * (2.0 * c_[i] + 3.0 * x * d_[i]);
            case 2: return 2.0 * c_[i] + 6.0 * x * d_[i];
            case 3: return 6.0 * d_[i];
            default: return 0.0;
        }
    }

private:
    size_t segment(double t) const {
        if (t <= t_.front()) return 0;
        if (t >= t_.back()) return t_.size() - 2;
        size_t lo = 0, hi = t_.size() - 1;
        while (hi - lo > 1) {
            size_t mid = (lo + hi) / 2;
            (t_[mid] <= t ? lo : hi) = mid;
        }
        return lo;
    }

    std::vector<double> t_, a_, b_, c_, d_;
};

}  // namespace detail

inline ReferenceSignal ReferenceSignal::from_samples(const std::vector<double>& times,
                                                     const std::vector<Vector>& values,
                                                     Index orders) {
    if (times.size() < 2 || times.size() != values.size())
        throw ConfigError("sampled reference: need matching time/value lists (>= 2 samples)");
    const Index dim = values.front().size();
    auto splines = std::make_shared<std::vector<detail::CubicSpline>>();
    for (Index c = 0; c < dim; ++c) {
        std::vector<double> comp(times.size());
        for (size_t i = 0; i < times.size(); ++i) comp[i] = values[i](c);
        splines->emplace_back(times, comp);
    }
    ReferenceSignal s;
    s.kind = ReferenceKind::sampled;
    s.dim = dim;
    s.max_order = orders;
    s.support_end = times.back();
    s.breakpoints = times;
    s.evaluator = [splines, dim](double t, Index order) {
        Vector v(dim);
        for (Index c = 0; c < dim; ++c) v(c) = (*splines)[static_cast<size_t>(c)].eval(t, order);
        return v;
    };
    return s;
}

}  // namespace funnelctl::refgen
