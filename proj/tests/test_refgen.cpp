#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "funnelctl/ode/rk45.hpp"
#include "funnelctl/refgen/generator.hpp"
#include "funnelctl/refgen/reference.hpp"
#include "demo.hpp"
#include "oracles.hpp"

using namespace funnelctl;
using Catch::Approx;

namespace {

// brute-force oracle for the improper start-value integral of the demo:
// 10^4-node composite Gauss on [0, 2pi] with the scalar exponential inlined
double demo_init_oracle() {
    std::vector<double> x, w;
    numlin::gauss_legendre(10, x, w);
    double acc = 0.0;
    const int panels = 1000;
    for (int p = 0; p < panels; ++p) {
        double lo = 2.0 * M_PI * p / panels, hi = 2.0 * M_PI * (p + 1) / panels;
        double mid = (lo + hi) / 2.0, half = (hi - lo) / 2.0;
        for (size_t i = 0; i < x.size(); ++i) {
            double s = mid + half * x[i];
            acc += half * w[i] * std::exp(-s) * (1.0 - std::cos(s));
        }
    }
    return -acc;
}

}  // namespace

TEST_CASE("governor start value by quadrature matches the brute-force oracle", "[refgen]") {
    auto s = demo::synthesize();
    auto y_ref = demo::reference();
    Vector init = refgen::generator_init_quadrature(s.split, y_ref);
    double oracle = demo_init_oracle();
    REQUIRE(init.size() == 1);
    REQUIRE(init(0) == Approx(oracle).epsilon(1e-10));
    // closed form of the oracle integral
    REQUIRE(oracle == Approx(-(1.0 - std::exp(-2.0 * M_PI)) / 2.0).epsilon(1e-12));
}

TEST_CASE("governor start value: zero reference gives zero", "[refgen]") {
    auto s = demo::synthesize();
    Vector init = refgen::generator_init_quadrature(s.split, refgen::ReferenceSignal::zero(1, 2));
    REQUIRE(init.norm() == Approx(0.0).margin(1e-14));
}

TEST_CASE("governor start value by the Sylvester route", "[refgen]") {
    auto s = demo::synthesize();

    SECTION("constant emitter") {
        refgen::Exosystem exo;
        exo.a_e = Matrix::Zero(1, 1);
        exo.c_e = Matrix::Identity(1, 1);
        exo.w0 = Vector::Constant(1, 3.0);
        Vector init = refgen::generator_init_sylvester(s.split, exo);
        // scalar: q2 = 1, p2 = 1 -> X = 3... init = -X w0 / ...: -P2 c / q2 = -3
        REQUIRE(init(0) == Approx(-3.0));
    }
    SECTION("harmonic emitter agrees with quadrature") {
        refgen::Exosystem exo;
        exo.a_e = Matrix(3, 3);
        exo.a_e << 0, -1, 0, 1, 0, 0, 0, 0, 0;
        exo.c_e = Matrix(1, 3);
        exo.c_e << -1, 0, 1;  // emits 1 - cos(t)
        exo.w0 = Vector(3);
        exo.w0 << 1, 0, 1;
        Vector init_sylv = refgen::generator_init_sylvester(s.split, exo);
        auto sig = refgen::ReferenceSignal::from_exosystem(exo, 3);
        Vector init_quad = refgen::generator_init_quadrature(s.split, sig);
        REQUIRE((init_sylv - init_quad).norm() < 1e-7);
        // closed form: -int_0^inf e^{-s}(1 - cos s) ds = -(1 - 1/2)
        REQUIRE(init_sylv(0) == Approx(-0.5));
    }
    SECTION("zero emitter state") {
        refgen::Exosystem exo;
        exo.a_e = Matrix::Zero(2, 2);
        exo.a_e << 0, 1, -1, 0;
        exo.c_e = Matrix(1, 2);
        exo.c_e << 1, 0;
        exo.w0 = Vector::Zero(2);
        Vector init = refgen::generator_init_sylvester(s.split, exo);
        REQUIRE(init.norm() == 0.0);
    }
}

TEST_CASE("exosystem validation rejects defective axis eigenvalues", "[refgen]") {
    refgen::Exosystem bad;
    bad.a_e = Matrix(2, 2);
    bad.a_e << 0, 1, 0, 0;  // Jordan block at 0
    bad.c_e = Matrix(1, 2);
    bad.c_e << 1, 0;
    bad.w0 = Vector::Ones(2);
    REQUIRE_THROWS_AS(refgen::ReferenceSignal::from_exosystem(bad, 2), ConfigError);

    refgen::Exosystem good;
    good.a_e = Matrix(2, 2);
    good.a_e << 0, 1, -1, 0;
    good.c_e = Matrix(1, 2);
    good.c_e << 1, 0;
    good.w0 = Vector::Ones(2);
    REQUIRE_NOTHROW(refgen::ReferenceSignal::from_exosystem(good, 2));
}

TEST_CASE("reference governor derivative tables", "[refgen]") {
    auto s = demo::synthesize();
    auto y_ref = demo::reference();
    Vector init = refgen::generator_init_quadrature(s.split, y_ref);
    auto gen = refgen::make_reference_generator(s.iso, s.red.k_row, s.nf.r, y_ref, init);

    SECTION("order zero at the start") {
        REQUIRE(gen.derivative(init, 0.0, 0)(0) == Approx(0.5 * init(0)));
    }
    SECTION("zero data gives zero at all orders") {
        auto gen0 = refgen::make_reference_generator(s.iso, s.red.k_row, s.nf.r,
                                                     refgen::ReferenceSignal::zero(1, 3),
                                                     Vector::Zero(1));
        for (Index j = 0; j <= 3; ++j)
            REQUIRE(gen0.derivative(Vector::Zero(1), 1.0, j).norm() == 0.0);
    }
    SECTION("finite differences confirm each derivative order") {
        ode::OdeOptions tight;
        tight.rtol = 1e-12;
        tight.atol = 1e-14;
        auto state_at = [&](double t) {
            return ode::integrate_to([&](double tt, const Vector& z) { return gen.rhs(tt, z); },
                                     0.0, init, t, tight);
        };
        const double t0 = 1.0;
        for (Index j = 1; j <= 3; ++j) {
            auto value = [&](double t) { return gen.derivative(state_at(t), t, j - 1); };
            double err_coarse =
                (oracles::central_diff(value, t0, 1e-3) - gen.derivative(state_at(t0), t0, j))
                    .norm();
            double err_fine =
                (oracles::central_diff(value, t0, 1e-4) - gen.derivative(state_at(t0), t0, j))
                    .norm();
            REQUIRE(err_coarse < 1e-4);
            // observed order of the central difference should be about two
            if (err_fine > 1e-12)
                REQUIRE(std::log10(err_coarse / err_fine) > 1.8);
        }
    }
}

TEST_CASE("boundedness audit accepts the correct start value", "[refgen]") {
    auto s = demo::synthesize();
    auto y_ref = demo::reference();
    Vector init = refgen::generator_init_quadrature(s.split, y_ref);
    auto gen = refgen::make_reference_generator(s.iso, s.red.k_row, s.nf.r, y_ref, init);
    auto cert = refgen::boundedness_audit(gen, 10.0, 1001, &s.split);
    REQUIRE(cert.pass);
}

TEST_CASE("boundedness audit flags a perturbed start value", "[refgen]") {
    auto s = demo::synthesize();
    auto y_ref = demo::reference();
    Vector init = refgen::generator_init_quadrature(s.split, y_ref);
    Vector bad = init + Vector::Constant(1, 0.1);
    auto gen = refgen::make_reference_generator(s.iso, s.red.k_row, s.nf.r, y_ref, bad);
    auto cert = refgen::boundedness_audit(gen, 10.0, 1001, &s.split);
    REQUIRE_FALSE(cert.pass);
    // growth is dominated by 0.1 e^t
    REQUIRE(cert.metrics.at("second_half_max") > 100.0);
}

TEST_CASE("antistable component escapes within the predicted window", "[refgen]") {
    auto s = demo::synthesize();
    auto y_ref = demo::reference();
    Vector init = refgen::generator_init_quadrature(s.split, y_ref);
    auto gen = refgen::make_reference_generator(s.iso, s.red.k_row, s.nf.r, y_ref, init);

    // baseline bound of the antistable component with the correct start value
    double base_bound = 0.0;
    auto grid = ode::uniform_grid(0.0, 30.0, 3001);
    ode::integrate_grid([&](double t, const Vector& z) { return gen.rhs(t, z); }, grid, init,
                        ode::OdeOptions{}, [&](double, const Vector& z) {
                            base_bound = std::max(base_bound, std::abs(z(0)));
                        });

    const double eps = 1e-3;
    const double alpha = 1.0;  // min Re of the antistable block
    const double t_escape_limit = 3.0 * std::log(10.0 / eps) / alpha;
    Vector bad = init + redef::embed_antistable(s.split, Vector::Constant(1, eps));
    double t_escape = -1.0;
    ode::integrate_grid([&](double t, const Vector& z) { return gen.rhs(t, z); }, grid, bad,
                        ode::OdeOptions{}, [&](double t, const Vector& z) {
                            if (t_escape < 0.0 && std::abs(z(0)) > 10.0 * base_bound) t_escape = t;
                        });
    REQUIRE(t_escape > 0.0);
    REQUIRE(t_escape < t_escape_limit);
}

TEST_CASE("sampled reference provides spline derivatives", "[refgen]") {
    std::vector<double> times;
    std::vector<Vector> values;
    for (int i = 0; i <= 60; ++i) {
        double t = 6.0 * i / 60.0;
        times.push_back(t);
        values.push_back(Vector::Constant(1, std::sin(t)));
    }
    auto sig = refgen::ReferenceSignal::from_samples(times, values, 2);
    REQUIRE(sig.kind == refgen::ReferenceKind::sampled);
    for (double t : {0.5, 2.0, 4.5}) {
        REQUIRE(sig(t, 0)(0) == Approx(std::sin(t)).margin(1e-4));
        REQUIRE(sig(t, 1)(0) == Approx(std::cos(t)).margin(1e-2));
    }
}
