#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "funnelctl/lti/simulate.hpp"
#include "funnelctl/redef/assumptions.hpp"
#include "funnelctl/redef/decomposition.hpp"
#include "funnelctl/redef/redefinition.hpp"
#include "funnelctl/redef/split.hpp"
#include "demo.hpp"
#include "oracles.hpp"

using namespace funnelctl;
using Catch::Approx;

TEST_CASE("demo plant: isolation picks ell=1 with unit isolated block", "[redef]") {
    auto s = demo::synthesize();
    REQUIRE(s.iso.ell == 1);
    REQUIRE(s.iso.k_dim == 1);
    REQUIRE(s.iso.q_tilde(0, 0) == Approx(1.0));
    REQUIRE(s.iso.p_tilde(0, 0) == Approx(1.0));
    REQUIRE(s.iso.q_hat1(0, 0) == Approx(-1.0));
    REQUIRE(s.iso.q_hat2(0, 0) == Approx(3.0));
    REQUIRE(s.iso.p_hat(0, 0) == Approx(0.0).margin(1e-12));
    // refined internal dynamics match the published form exactly
    Matrix tq = s.iso.t_transform * s.nf.q * s.iso.t_inverse;
    Matrix expect(2, 2);
    expect << -1, 3, 0, 1;
    REQUIRE((tq - expect).norm() < 1e-12);
    Matrix tp = s.iso.t_transform * s.nf.p;
    REQUIRE(tp(0, 0) == Approx(0.0).margin(1e-12));
    REQUIRE(tp(1, 0) == Approx(1.0));
}

TEST_CASE("isolation: conjugate pair cannot be split (m = 2)", "[redef]") {
    // internal matrix with eigenvalues {-1 +- i, 1}: the only size-2 selection
    // containing +1 would break the complex pair
    lti::NormalForm nf;
    nf.r = 1;
    nf.n = 5;
    nf.m = 2;
    nf.q = Matrix(3, 3);
    nf.q << -1, 1, 0, -1, -1, 0, 0, 0, 1;
    nf.p = Matrix(3, 2);
    nf.p << 1, 0, 0, 1, 1, 1;
    try {
        redef::find_unstable_isolation(nf);
        FAIL("expected NoDecomposition");
    } catch (const NoDecomposition& e) {
        REQUIRE(std::string(e.what()).find("ell=1") != std::string::npos);
    }
}

TEST_CASE("isolation: already block-triangular input is accepted at ell=1", "[redef]") {
    lti::NormalForm nf;
    nf.r = 1;
    nf.n = 3;
    nf.m = 1;
    nf.q = Matrix(2, 2);
    nf.q << -2, 1, 0, 3;
    nf.p = Matrix(2, 1);
    nf.p << 1, 1;
    auto iso = redef::find_unstable_isolation(nf);
    REQUIRE(iso.ell == 1);
    REQUIRE(iso.q_tilde(0, 0) == Approx(3.0));
    REQUIRE(iso.p_tilde(0, 0) == Approx(1.0));
    auto eigs = numlin::eigenvalues_of(iso.q_hat1);
    REQUIRE(eigs.size() == 1);
    REQUIRE(eigs[0].real() == Approx(-2.0));
    Matrix tq = iso.t_transform * nf.q * iso.t_inverse;
    REQUIRE(std::abs(tq(1, 0)) < 1e-12);
}

TEST_CASE("isolation: skipped ell values leave diagnostics", "[redef]") {
    lti::NormalForm nf;
    nf.r = 1;
    nf.n = 3;
    nf.m = 1;
    nf.q = Matrix(2, 2);
    nf.q << 1, 1, 0, 2;
    nf.p = Matrix(2, 1);
    nf.p << 1, 2;
    auto iso = redef::find_unstable_isolation(nf);
    REQUIRE(iso.ell == 2);
    bool logged_ell1 = false;
    for (const auto& line : iso.search_log)
        if (line.find("ell=1") != std::string::npos) logged_ell1 = true;
    REQUIRE(logged_ell1);
}

TEST_CASE("spectral split of the demo isolation is trivial", "[redef]") {
    auto s = demo::synthesize();
    REQUIRE(s.split.k1 == 0);
    REQUIRE(s.split.k2 == 1);
    REQUIRE(s.split.k3 == 0);
    REQUIRE(s.split.q2(0, 0) == Approx(1.0));
    REQUIRE(s.split.p2(0, 0) == Approx(1.0));
}

TEST_CASE("spectral split: diagonal two-mode block", "[redef]") {
    redef::UnstableIsolation iso;
    iso.m = 1;
    iso.ell = 2;
    iso.q_tilde = Matrix(2, 2);
    iso.q_tilde << -2, 0, 0, 3;
    iso.p_tilde = Matrix(2, 1);
    iso.p_tilde << 1, 1;
    auto sp = redef::spectral_split(iso);
    REQUIRE(sp.k1 == 1);
    REQUIRE(sp.k2 == 1);
    REQUIRE(sp.k3 == 0);
    REQUIRE(sp.q1(0, 0) == Approx(-2.0));
    REQUIRE(sp.q2(0, 0) == Approx(3.0));
}

TEST_CASE("spectral split: three clusters reassemble the block", "[redef]") {
    std::mt19937 rng(31);
    Matrix base = Matrix::Zero(4, 4);
    base(0, 0) = -1.0;
    base(1, 1) = 2.0;
    base(2, 2) = 0.0;
    base(2, 3) = 1.0;
    base(3, 2) = -1.0;
    base(3, 3) = 0.0;  // eigenvalues {-1, 2, +-i}
    for (Index r = 0; r < 4; ++r)
        for (Index c = r + 1; c < 4; ++c)
            base(r, c) += 0.3 * oracles::random_matrix(rng, 1, 1)(0, 0);
    Matrix g = oracles::random_orthogonal(rng, 4);
    redef::UnstableIsolation iso;
    iso.m = 1;
    iso.ell = 4;
    iso.q_tilde = g * base * g.transpose();
    iso.p_tilde = oracles::random_matrix(rng, 4, 1);
    auto sp = redef::spectral_split(iso);
    REQUIRE(sp.k1 == 1);
    REQUIRE(sp.k2 == 1);
    REQUIRE(sp.k3 == 2);
    Matrix block = Matrix::Zero(4, 4);
    block.topLeftCorner(1, 1) = sp.q1;
    block.block(1, 1, 1, 1) = sp.q2;
    block.bottomRightCorner(2, 2) = sp.q3;
    Matrix rebuilt = sp.w_inverse * block * sp.w_transform;
    REQUIRE((rebuilt - iso.q_tilde).norm() < 1e-9 * std::max(1.0, iso.q_tilde.norm()));
}

TEST_CASE("axis-band response certificate", "[redef]") {
    redef::SpectralSplit sp;
    sp.k1 = sp.k2 = 0;
    sp.k3 = 2;
    sp.q3 = Matrix(2, 2);
    sp.q3 << 0, 1, -1, 0;
    sp.p3 = Matrix(2, 1);
    sp.p3 << 0, 1;
    sp.q1 = sp.q2 = Matrix(0, 0);
    sp.p1 = sp.p2 = Matrix(0, 1);
    sp.w_transform = sp.w_inverse = Matrix::Identity(2, 2);

    SECTION("no axis-band part passes trivially") {
        redef::SpectralSplit trivial;
        trivial.k1 = trivial.k2 = trivial.k3 = 0;
        auto cert = redef::check_reference_boundedness(trivial,
                                                       refgen::ReferenceSignal::zero(1, 2), 20.0);
        REQUIRE(cert.pass);
    }
    SECTION("resonant reference is rejected") {
        auto res_ref = refgen::ReferenceSignal::from_function(
            [](double t, Index order) {
                Vector v(1);
                v(0) = (order == 0) ? std::sin(t) : std::cos(t);
                return v;
            },
            1, 1);
        auto cert = redef::check_reference_boundedness(sp, res_ref, 40.0);
        REQUIRE_FALSE(cert.pass);
    }
    SECTION("constant reference stays bounded") {
        auto const_ref = refgen::ReferenceSignal::from_function(
            [](double, Index order) {
                Vector v(1);
                v(0) = (order == 0) ? 1.0 : 0.0;
                return v;
            },
            1, 1);
        auto cert = redef::check_reference_boundedness(sp, const_ref, 40.0);
        REQUIRE(cert.pass);
    }
}

TEST_CASE("disturbance decoupling distinguishes image membership from zero", "[redef]") {
    auto s = demo::synthesize();

    SECTION("demo disturbances never reach the isolated block") {
        const auto& sys = s.sys;
        const auto& nf = s.nf;
        auto d_eta = [&sys, &nf](double t) -> Vector {
            return nf.u_transform.bottomRows(2) * sys.disturbance(t);
        };
        auto cert = redef::check_disturbance_decoupling(s.iso, d_eta, s.nf.gamma, s.red.k_row);
        REQUIRE(cert.pass);
        REQUIRE(cert.metrics.at("max_delta") == Approx(0.0).margin(1e-12));
    }
    SECTION("zero disturbance passes") {
        auto cert = redef::check_disturbance_decoupling(
            s.iso, [](double) { return Vector::Zero(2); }, s.nf.gamma, s.red.k_row);
        REQUIRE(cert.pass);
    }
    SECTION("disturbance inside im(Ptilde) still violates decoupling") {
        // constant push along the isolated coordinate: admissible for the
        // isolation's image condition (square Ptilde) yet nonzero
        auto d_eta = [](double) {
            Vector v(2);
            v << 1.0, 0.0;  // internal coordinates (x3, x4): hits the isolated part
            return v;
        };
        redef::IsolationOptions opts;
        opts.internal_disturbance = d_eta;
        auto iso2 = redef::find_unstable_isolation(s.nf, opts);  // image check passes
        REQUIRE(iso2.ell == 1);
        auto cert = redef::check_disturbance_decoupling(iso2, d_eta, s.nf.gamma, s.red.k_row);
        REQUIRE_FALSE(cert.pass);
        REQUIRE(cert.metrics.at("max_delta") > 0.1);
    }
}

TEST_CASE("redefinition of the demo plant", "[redef]") {
    auto s = demo::synthesize();
    REQUIRE(s.red.k_row.rows() == 1);
    REQUIRE(s.red.k_row(0, 0) == Approx(0.5));
    REQUIRE(s.red.f_coeffs.size() == 1);
    REQUIRE(s.red.f_coeffs[0](0, 0) == Approx(2.0));

    // measurement rows on the original state: y_new = x3 / 2
    Matrix row0 = s.red.h_x.row(0);
    Matrix expect(1, 4);
    expect << 0, 0, 0.5, 0;
    REQUIRE((row0 - expect).norm() < 1e-12);

    // chain-form coefficients of the redefined output
    REQUIRE(s.red.r_hat.size() == 3);
    REQUIRE(s.red.r_hat[0](0, 0) == Approx(-6.0));
    REQUIRE(s.red.r_hat[1](0, 0) == Approx(-11.0));
    REQUIRE(s.red.r_hat[2](0, 0) == Approx(-6.0));
    REQUIRE(s.red.s1_new(0, 0) == Approx(0.5));
    REQUIRE(s.red.p_hat_new.size() == 2);
    REQUIRE(s.red.p_hat_new[0](0, 0) == Approx(6.0));
    REQUIRE(s.red.p_hat_new[1](0, 0) == Approx(0.0).margin(1e-12));

    auto cert = redef::verify_new_relative_degree(s.red);
    REQUIRE(cert.pass);
    REQUIRE(cert.metrics.at("r_new") == Approx(3.0));
}

TEST_CASE("K annihilates the Krylov chain except at the top", "[redef]") {
    std::mt19937 rng(41);
    int done = 0;
    for (int trial = 0; trial < 20 && done < 8; ++trial) {
        Index m = 1 + static_cast<Index>(rng() % 2);
        Index k_int = 2 * m + static_cast<Index>(rng() % 3);
        auto planted = oracles::planted_system(rng, 2 * m + k_int, m, 2, false);
        lti::NormalForm nf;
        redef::UnstableIsolation iso;
        try {
            nf = lti::byrnes_isidori(planted.sys, 2);
            iso = redef::find_unstable_isolation(nf);
        } catch (const Error&) {
            continue;  // random internal dynamics need not admit the isolation
        }
        if (iso.ell == 0) continue;
        ++done;
        auto red = redef::build_redefinition(nf, iso);
        Matrix kq = red.k_row;
        for (Index j = 0; j + 1 < iso.ell; ++j) {
            REQUIRE((kq * iso.p_tilde).norm() < 1e-9);
            kq = kq * iso.q_tilde;
        }
        Matrix gamma_inv = nf.gamma.fullPivLu().inverse();
        REQUIRE((kq * iso.p_tilde - gamma_inv).norm() < 1e-9 * std::max(1.0, gamma_inv.norm()));
        REQUIRE(std::isfinite(red.theta_cond));

        // reconstruction: sum F_i (K Qtilde^{i-1}) = identity on the isolated block
        Matrix recon = Matrix::Zero(iso.ell * m, iso.ell * m);
        Matrix kqj = red.k_row;
        for (Index i = 0; i < iso.ell; ++i) {
            recon += red.f_coeffs[static_cast<size_t>(i)] * kqj;
            kqj = kqj * iso.q_tilde;
        }
        REQUIRE((recon - Matrix::Identity(iso.ell * m, iso.ell * m)).norm() < 1e-8);

        // residual internal dynamics are strictly stable
        for (const auto& l : numlin::eigenvalues_of(iso.q_hat1)) REQUIRE(l.real() < 0.0);
    }
    REQUIRE(done >= 4);
}

TEST_CASE("redefined chain system reproduces the plant's new output", "[redef]") {
    auto s = demo::synthesize(false);  // disturbance-free cross-simulation
    auto u_fun = [](double t) {
        Vector u(1);
        u << std::sin(1.3 * t) + 0.2;
        return u;
    };
    s.sys.x0 = Vector(4);
    s.sys.x0 << 0.3, -0.1, 0.2, 0.05;
    auto traj_x = lti::simulate_open_loop(s.sys, u_fun, 4.0, 81);

    lti::LtiSystem chain(s.red.a_new, s.red.b_new, s.red.c_new);
    chain.x0 = s.red.to_chain * s.red.refined_embed * s.sys.x0;
    auto traj_z = lti::simulate_open_loop(chain, u_fun, 4.0, 81);

    for (size_t g = 0; g < traj_x.t.size(); ++g) {
        double y_new_plant = (s.red.h_x * traj_x.x[g])(0);
        double y_new_chain = traj_z.x[g](0);
        REQUIRE(std::abs(y_new_plant - y_new_chain) < 1e-6);
    }
}

TEST_CASE("minimum-phase plant bypasses the redefinition", "[redef]") {
    std::mt19937 rng(53);
    auto planted = oracles::planted_system(rng, 5, 1, 2, true);
    auto nf = lti::byrnes_isidori(planted.sys, 2);
    auto iso = redef::find_unstable_isolation(nf);
    REQUIRE(iso.ell == 0);
    auto red = redef::build_redefinition(nf, iso);
    REQUIRE(red.chain_len() == 2);
    auto cert = redef::verify_new_relative_degree(red);
    REQUIRE(cert.pass);
    REQUIRE(cert.metrics.at("r_new") == Approx(2.0));
}
