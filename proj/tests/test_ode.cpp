#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "funnelctl/numlin/quadrature.hpp"
#include "funnelctl/ode/rk45.hpp"

using namespace funnelctl;
using Catch::Approx;

TEST_CASE("rk45 reproduces the scalar exponential and lands on grid times", "[ode]") {
    auto rhs = [](double, const Vector& y) -> Vector { return -y; };
    Vector y0(1);
    y0 << 1.0;
    auto grid = ode::uniform_grid(0.0, 5.0, 51);
    std::vector<double> seen_t;
    Vector yend = ode::integrate_grid(rhs, grid, y0, ode::OdeOptions{}, [&](double t, const Vector& y) {
        seen_t.push_back(t);
        REQUIRE(y(0) == Approx(std::exp(-t)).epsilon(1e-8).margin(1e-10));
    });
    REQUIRE(seen_t.size() == grid.size());
    REQUIRE(seen_t.back() == 5.0);
    REQUIRE(yend(0) == Approx(std::exp(-5.0)).epsilon(1e-9));
}

TEST_CASE("rk45 forced response matches the closed form", "[ode]") {
    // x' = -x + 1, x(0) = 0  =>  x(t) = 1 - e^{-t}
    auto rhs = [](double, const Vector& y) -> Vector {
        Vector d(1);
        d << 1.0 - y(0);
        return d;
    };
    Vector y0 = Vector::Zero(1);
    ode::OdeOptions tight;
    tight.rtol = 1e-11;
    tight.atol = 1e-13;
    Vector y = ode::integrate_to(rhs, 0.0, y0, 3.0, tight);
    REQUIRE(y(0) == Approx(1.0 - std::exp(-3.0)).epsilon(1e-10));
    // defaults carry the configured absolute tolerance
    Vector yd = ode::integrate_to(rhs, 0.0, y0, 3.0, ode::OdeOptions{});
    REQUIRE(yd(0) == Approx(1.0 - std::exp(-3.0)).margin(1e-6));
}

TEST_CASE("rk45 gives up after repeated guard rejections", "[ode]") {
    auto rhs = [](double t, const Vector& y) -> Vector {
        if (t > 0.5) throw FunnelBoundaryReached(0, t, "guard");
        return y;
    };
    Vector y0(1);
    y0 << 1.0;
    REQUIRE_THROWS_AS(ode::integrate_to(rhs, 0.0, y0, 1.0, ode::OdeOptions{}), StepUnderflow);
}

TEST_CASE("gauss nodes integrate polynomials exactly", "[ode]") {
    std::vector<double> x, w;
    numlin::gauss_legendre(10, x, w);
    REQUIRE(x.size() == 10);
    // degree-19 monomial on [-1, 1]
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) acc += w[i] * std::pow(x[i], 18);
    REQUIRE(acc == Approx(2.0 / 19.0).epsilon(1e-13));
    double odd = 0.0;
    for (size_t i = 0; i < x.size(); ++i) odd += w[i] * std::pow(x[i], 19);
    REQUIRE(odd == Approx(0.0).margin(1e-14));
}

TEST_CASE("adaptive quadrature handles oscillatory decay and breakpoints", "[ode]") {
    numlin::VectorIntegrand f = [](double s) {
        Vector v(1);
        v << std::exp(-s) * (1.0 - std::cos(s));
        return v;
    };
    double exact = (1.0 - std::exp(-2.0 * M_PI)) / 2.0;
    Vector got = numlin::adaptive_quadrature(f, 0.0, 2.0 * M_PI, 1e-12);
    REQUIRE(got(0) == Approx(exact).epsilon(1e-11));

    // piecewise integrand with a hard breakpoint
    numlin::VectorIntegrand g = [](double s) {
        Vector v(1);
        v << (s < 1.0 ? 1.0 : 0.0);
        return v;
    };
    Vector piece = numlin::adaptive_quadrature(g, 0.0, 2.0, 1e-12, {1.0});
    REQUIRE(piece(0) == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("composite gauss agrees with the adaptive result", "[ode]") {
    numlin::VectorIntegrand f = [](double s) {
        Vector v(1);
        v << std::sin(3.0 * s) * std::exp(-0.5 * s);
        return v;
    };
    Vector a = numlin::adaptive_quadrature(f, 0.0, 10.0, 1e-12);
    Vector b = numlin::composite_gauss(f, 0.0, 10.0, 1000, 10);
    REQUIRE(a(0) == Approx(b(0)).epsilon(1e-11));
}
