#pragma once

// Shared fixture: the four-state non-minimum-phase demo plant, its synthesis
// artifacts, the piecewise cosine reference, and the demo funnel levels.

#include <cmath>

#include "funnelctl/funnel/funnel_function.hpp"
#include "funnelctl/lti/normal_form.hpp"
#include "funnelctl/lti/relative_degree.hpp"
#include "funnelctl/redef/redefinition.hpp"
#include "funnelctl/redef/split.hpp"
#include "funnelctl/refgen/generator.hpp"

namespace demo {

using namespace funnelctl;

inline lti::LtiSystem plant(bool with_disturbance) {
    Matrix a(4, 4);
    a << -1, 1, 0, 0, 0, -3, 0, 1, 1, 0, -2, 0, 0, 0, 3, -1;
    Matrix b(4, 1);
    b << 0, 2, 0, 0;
    Matrix c(1, 4);
    c << 1, 0, -3, 0;
    lti::LtiSystem sys(a, b, c);
    if (with_disturbance) {
        sys.disturbance.evaluator = [](double t) {
            Vector v(4);
            v << 0.0, 0.5 * std::sin(5.0 * t) + std::cos(8.0 * t), 0.0,
                std::sin(6.0 * t) + 0.5 * std::cos(4.0 * t);
            return v;
        };
        sys.disturbance.sup_bound = 3.0;
    }
    return sys;
}

inline refgen::ReferenceSignal reference() {
    auto eval = [](double t, Index order) {
        Vector v(1);
        if (t >= 2.0 * M_PI)
            v(0) = 0.0;
        else
            v(0) = (order == 0) ? 1.0 - std::cos(t)
                                : -std::cos(t + static_cast<double>(order) * M_PI / 2.0);
        return v;
    };
    return refgen::ReferenceSignal::from_function(eval, 1, 3, 2.0 * M_PI, {2.0 * M_PI});
}

inline funnel::FunnelSpec funnels() {
    funnel::FunnelSpec spec;
    spec.levels.push_back(funnel::FunnelFunction::exponential(1.0, 2.0, 0.01));
    spec.levels.push_back(funnel::FunnelFunction::exponential(2.0, 2.0, 0.01));
    spec.levels.push_back(funnel::FunnelFunction::exponential(2.0, 10.0, 0.01));
    return spec;
}

struct Synthesis {
    lti::LtiSystem sys;
    lti::NormalForm nf;
    redef::UnstableIsolation iso;
    redef::SpectralSplit split;
    redef::OutputRedefinition red;
};

inline Synthesis synthesize(bool with_disturbance = true) {
    Synthesis s;
    s.sys = plant(with_disturbance);
    auto rd = lti::relative_degree(s.sys);
    s.nf = lti::byrnes_isidori(s.sys, rd.r);
    redef::IsolationOptions opts;
    const auto& sys = s.sys;
    const auto& nf = s.nf;
    opts.internal_disturbance = [&sys, &nf](double t) -> Vector {
        return nf.u_transform.bottomRows(nf.internal_dim()) * sys.disturbance(t);
    };
    s.iso = redef::find_unstable_isolation(s.nf, opts);
    s.split = redef::spectral_split(s.iso);
    s.red = redef::build_redefinition(s.nf, s.iso);
    return s;
}

}  // namespace demo
