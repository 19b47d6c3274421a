#pragma once

#include <functional>
#include <vector>

#include "funnelctl/lti/system.hpp"
#include "funnelctl/ode/rk45.hpp"

namespace funnelctl::lti {

struct StateTrajectory {
    std::vector<double> t;
    std::vector<Vector> x;
};

/// Open-loop integration of x' = A x + B u(t) + d(t), recorded on a uniform grid.
inline StateTrajectory simulate_open_loop(const LtiSystem& sys,
                                          const std::function<Vector(double)>& u, double horizon,
                                          Index points = 201, ode::OdeOptions opts = {}) {
    StateTrajectory traj;
    auto rhs = [&](double t, const Vector& x) -> Vector {
        return sys.a * x + sys.b * u(t) + sys.disturbance(t);
    };
    auto grid = ode::uniform_grid(0.0, horizon, points);
    ode::integrate_grid(rhs, grid, sys.x0, opts, [&](double t, const Vector& x) {
        traj.t.push_back(t);
        traj.x.push_back(x);
    });
    return traj;
}

}  // namespace funnelctl::lti
