#pragma once

#include <functional>
#include <utility>

#include "funnelctl/core.hpp"

namespace funnelctl::lti {

/// Bounded disturbance d(t). The evaluator must be a deterministic,
/// re-entrant function of t.
struct DisturbanceModel {
    std::function<Vector(double)> evaluator;
    double sup_bound = 0.0;

    static DisturbanceModel zero(Index n) {
        DisturbanceModel d;
        d.evaluator = [n](double) { return Vector::Zero(n); };
        d.sup_bound = 0.0;
        return d;
    }

    Vector operator()(double t) const { return evaluator(t); }
};

/// Plant x' = A x + B u + d(t), y = C x with square input/output channel.
struct LtiSystem {
    Matrix a;  // n x n
    Matrix b;  // n x m
    Matrix c;  // m x n
    DisturbanceModel disturbance;
    Vector x0;

    Index n() const { return a.rows(); }
    Index m() const { return b.cols(); }

    LtiSystem() = default;
    LtiSystem(Matrix a_, Matrix b_, Matrix c_)
        : a(std::move(a_)), b(std::move(b_)), c(std::move(c_)) {
        disturbance = DisturbanceModel::zero(a.rows());
        x0 = Vector::Zero(a.rows());
        validate();
    }
    LtiSystem(Matrix a_, Matrix b_, Matrix c_, DisturbanceModel d_, Vector x0_)
        : a(std::move(a_)), b(std::move(b_)), c(std::move(c_)), disturbance(std::move(d_)),
          x0(std::move(x0_)) {
        validate();
    }

    void validate() const {
        if (a.rows() != a.cols()) throw ConfigError("system: A must be square");
        if (b.rows() != a.rows()) throw ConfigError("system: B row count must match A");
        if (c.cols() != a.rows()) throw ConfigError("system: C column count must match A");
        if (c.rows() != b.cols()) throw ConfigError("system: input and output counts must match");
        if (m() < 1) throw ConfigError("system: at least one input required");
        if (n() < m()) throw ConfigError("system: state dimension below channel count");
        if (x0.size() != n()) throw ConfigError("system: x0 length must match A");
        if (!all_finite(a) || !all_finite(b) || !all_finite(c))
            throw ConfigError("system: non-finite entries");
    }
};

}  // namespace funnelctl::lti
