#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "funnelctl/numlin/expm.hpp"
#include "funnelctl/numlin/schur.hpp"
#include "funnelctl/numlin/sylvester.hpp"
#include "oracles.hpp"

using namespace funnelctl;
using Catch::Approx;

namespace {
bool contains_eig(const ComplexVector& eigs, Complex target, double tol) {
    for (const auto& l : eigs)
        if (std::abs(l - target) <= tol) return true;
    return false;
}
}  // namespace

TEST_CASE("ordered_schur: diagonal input, stable leading", "[numlin]") {
    Matrix m(2, 2);
    m << -1, 0, 0, 2;
    auto d = numlin::ordered_schur(m, [](Complex l) { return l.real() < 0; });
    REQUIRE(d.quasi_triangular(0, 0) == Approx(-1.0));
    REQUIRE(d.quasi_triangular(1, 1) == Approx(2.0));
    REQUIRE((d.orthogonal * d.quasi_triangular * d.orthogonal.transpose() - m).norm() < 1e-12);
}

TEST_CASE("ordered_schur: antistable eigenvalue moved to the front", "[numlin]") {
    Matrix q(3, 3);
    q << -1, 1, 0, -1, -1, 0, 0, 0, 1;
    auto d = numlin::ordered_schur(q, [](Complex l) { return l.real() > 0; });
    REQUIRE(d.block_size.front() == 1);
    REQUIRE(d.quasi_triangular(0, 0) == Approx(1.0));
    REQUIRE(d.block_size.back() == 2);
    REQUIRE(contains_eig(d.eigenvalues, Complex(-1.0, 1.0), 1e-12));
    REQUIRE(contains_eig(d.eigenvalues, Complex(-1.0, -1.0), 1e-12));
    REQUIRE((d.orthogonal * d.quasi_triangular * d.orthogonal.transpose() - q).norm() <
            1e-12 * q.norm());
}

TEST_CASE("ordered_schur: random 6x6 with planted spectrum", "[numlin]") {
    std::mt19937 rng(42);
    ComplexVector spectrum = {Complex(-2, 0), Complex(1.5, 0),      Complex(-0.5, 2),
                              Complex(-0.5, -2), Complex(3, 0.7), Complex(3, -0.7)};
    Matrix m = oracles::matrix_with_spectrum(rng, spectrum);
    auto d = numlin::ordered_schur(m, [](Complex l) { return l.real() > 0; });

    double resid = (d.orthogonal * d.quasi_triangular * d.orthogonal.transpose() - m).norm();
    REQUIRE(resid < 1e-10 * m.norm());
    for (const auto& target : spectrum) REQUIRE(contains_eig(d.eigenvalues, target, 1e-8));

    // cross-check eigenvalues against the unshifted QR oracle
    auto oracle = oracles::unshifted_qr_eigs(m);
    for (const auto& target : oracle) REQUIRE(contains_eig(d.eigenvalues, target, 1e-5));

    // selected (antistable) eigenvalues lead
    Index lead = 0;
    for (size_t bi = 0; bi < d.block_start.size(); ++bi) {
        if (d.eigenvalues[static_cast<size_t>(d.block_start[bi])].real() <= 0) break;
        lead += d.block_size[bi];
    }
    REQUIRE(lead == 3);
}

TEST_CASE("ordered_schur: reconstruction residual on random sizes", "[numlin]") {
    std::mt19937 rng(7);
    for (Index n : {3, 5, 8, 12, 20}) {
        Matrix m = oracles::random_matrix(rng, n, n, 2.0);
        auto d = numlin::ordered_schur(m, [](Complex l) { return l.real() < 0.2; });
        REQUIRE((d.orthogonal * d.quasi_triangular * d.orthogonal.transpose() - m).norm() <=
                1e-10 * std::max(1.0, m.norm()));
        REQUIRE((d.orthogonal.transpose() * d.orthogonal - Matrix::Identity(n, n)).norm() < 1e-12);
    }
}

TEST_CASE("classify_spectrum partitions and keeps conjugate pairs together", "[numlin]") {
    SECTION("real pair") {
        ComplexVector eigs = {Complex(-1, 0), Complex(1, 0)};
        auto c = numlin::classify_spectrum(eigs, 1e-9);
        REQUIRE(c.stable == std::vector<Index>{0});
        REQUIRE(c.antistable == std::vector<Index>{1});
        REQUIRE(c.critical.empty());
    }
    SECTION("axis eigenvalue") {
        auto c = numlin::classify_spectrum({Complex(0, 0)}, 1e-9);
        REQUIRE(c.critical == std::vector<Index>{0});
    }
    SECTION("conjugate pair with antistable singleton") {
        ComplexVector eigs = {Complex(-1, 1), Complex(-1, -1), Complex(1, 0)};
        auto c = numlin::classify_spectrum(eigs, 1e-9);
        REQUIRE(c.stable == std::vector<Index>{0, 1});
        REQUIRE(c.antistable == std::vector<Index>{2});
    }
    SECTION("partition is exhaustive and conjugate-closed on random spectra") {
        std::mt19937 rng(3);
        std::uniform_real_distribution<double> dist(-2.0, 2.0);
        for (int trial = 0; trial < 50; ++trial) {
            ComplexVector eigs;
            for (int p = 0; p < 4; ++p) {
                double re = dist(rng), im = dist(rng);
                eigs.emplace_back(re, im);
                eigs.emplace_back(re, -im);
            }
            auto c = numlin::classify_spectrum(eigs, 1e-3);
            REQUIRE(c.stable.size() + c.antistable.size() + c.critical.size() == eigs.size());
            auto same_class = [&](Index i, Index j) {
                auto in = [](const std::vector<Index>& v, Index x) {
                    return std::find(v.begin(), v.end(), x) != v.end();
                };
                return (in(c.stable, i) == in(c.stable, j)) &&
                       (in(c.antistable, i) == in(c.antistable, j)) &&
                       (in(c.critical, i) == in(c.critical, j));
            };
            for (size_t p = 0; p < eigs.size(); p += 2)
                REQUIRE(same_class(static_cast<Index>(p), static_cast<Index>(p + 1)));
        }
    }
}

TEST_CASE("solve_sylvester: scalar cases", "[numlin]") {
    Matrix a(1, 1), b(1, 1), c(1, 1);
    a << 2;
    b << 0;
    c << 1;
    REQUIRE(numlin::solve_sylvester(a, b, c)(0, 0) == Approx(0.5));
    a << 1;
    b << -1;
    c << 4;
    REQUIRE(numlin::solve_sylvester(a, b, c)(0, 0) == Approx(2.0));
}

TEST_CASE("solve_sylvester: stable/antistable pair against Kronecker oracle", "[numlin]") {
    std::mt19937 rng(11);
    Matrix a = oracles::random_matrix(rng, 4, 4);
    a -= (norm2(a) + 0.5) * Matrix::Identity(4, 4);  // stable
    Matrix b = oracles::random_matrix(rng, 3, 3);
    b += (norm2(b) + 0.5) * Matrix::Identity(3, 3);  // antistable
    Matrix c = oracles::random_matrix(rng, 4, 3);
    Matrix x = numlin::solve_sylvester(a, b, c);
    Matrix x_oracle = oracles::kron_sylvester(a, b, c);
    REQUIRE((a * x - x * b - c).norm() < 1e-10 * std::max(1.0, c.norm()));
    REQUIRE((x - x_oracle).norm() < 1e-9 * std::max(1.0, x_oracle.norm()));
}

TEST_CASE("solve_sylvester: oracle agreement on random separated instances", "[numlin]") {
    std::mt19937 rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        Index p = 2 + static_cast<Index>(rng() % 7);  // up to 8
        Index q = 1 + static_cast<Index>(rng() % 8);
        Matrix a = oracles::random_matrix(rng, p, p);
        a -= (norm2(a) + 1.0) * Matrix::Identity(p, p);
        Matrix b = oracles::random_matrix(rng, q, q);
        b += (norm2(b) + 1.0) * Matrix::Identity(q, q);
        Matrix c = oracles::random_matrix(rng, p, q);
        Matrix x = numlin::solve_sylvester(a, b, c);
        Matrix xo = oracles::kron_sylvester(a, b, c);
        REQUIRE((x - xo).norm() <= 1e-9 * std::max(1.0, xo.norm()));
    }
}

TEST_CASE("solve_sylvester: overlapping spectra rejected", "[numlin]") {
    Matrix a(2, 2), b(2, 2), c(2, 2);
    a << 1, 0, 0, -2;
    b << 1, 0, 0, 5;
    c.setOnes();
    REQUIRE_THROWS_AS(numlin::solve_sylvester(a, b, c), SpectraNotSeparated);
}

TEST_CASE("expm: exact special cases", "[numlin]") {
    Matrix z = Matrix::Zero(3, 3);
    REQUIRE((numlin::expm(z, 1.0) - Matrix::Identity(3, 3)).norm() == 0.0);

    Matrix nilp(2, 2);
    nilp << 0, 1, 0, 0;
    Matrix e = numlin::expm(nilp, 1.0);
    REQUIRE(e(0, 0) == Approx(1.0));
    REQUIRE(e(0, 1) == Approx(1.0));
    REQUIRE(e(1, 0) == Approx(0.0).margin(1e-15));
    REQUIRE(e(1, 1) == Approx(1.0));

    Matrix s(1, 1);
    s << -1;
    REQUIRE(numlin::expm(s, 2.0 * M_PI)(0, 0) == Approx(std::exp(-2.0 * M_PI)).epsilon(1e-12));
}

TEST_CASE("expm: semigroup property on random stable matrices", "[numlin]") {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        Index n = 2 + static_cast<Index>(rng() % 5);
        Matrix m = oracles::random_matrix(rng, n, n);
        m -= (norm2(m) + 0.2) * Matrix::Identity(n, n);
        double s = 0.3, t = 1.1;
        Matrix lhs = numlin::expm(m, s + t);
        Matrix rhs = numlin::expm(m, s) * numlin::expm(m, t);
        REQUIRE((lhs - rhs).norm() <= 1e-9 * std::max(1.0, rhs.norm()));
    }
}

TEST_CASE("reorder_schur fails loudly on inseparable blocks", "[numlin]") {
    // equal eigenvalues cannot be exchanged
    Matrix m(2, 2);
    m << 1.0, 1.0, 0.0, 1.0 + 1e-15;
    auto d = numlin::real_schur(m);
    std::vector<int> ranks = {1, 0};
    REQUIRE_THROWS_AS(numlin::reorder_schur_by_block(d, ranks, 1e-12), SwapFailure);
}
