#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "doctest.h"

#include "dershap/errors.hpp"
#include "dershap/inputs.hpp"
#include "dershap/linalg.hpp"

using namespace dershap;
using inputs::InputSpec;
using inputs::Marginal;
using inputs::QuadratureGrid;
using inputs::Sampler;

TEST_CASE("marginal validation") {
    CHECK_THROWS_AS((void)Marginal::uniform(1.0, 1.0), ConfigError);
    CHECK_THROWS_AS((void)Marginal::uniform(2.0, 1.0), ConfigError);
    CHECK_THROWS_AS((void)Marginal::normal(0.0, 0.0), ConfigError);
    CHECK_THROWS_AS((void)Marginal::normal(0.0, -1.0), ConfigError);
    CHECK(Marginal::uniform(0.0, 1.0).is_unit_uniform());
    CHECK_FALSE(Marginal::uniform(0.0, 2.0).is_unit_uniform());
    CHECK_FALSE(Marginal::normal(0.0, 1.0).is_uniform());
}

TEST_CASE("spec construction and flags") {
    auto u = InputSpec::unit_uniform(3);
    CHECK(u.dimension() == 3);
    CHECK(u.independent_marginals());
    CHECK(u.all_uniform());
    CHECK(u.all_unit_uniform());

    auto n = InputSpec::standard_normal(2);
    CHECK_FALSE(n.all_uniform());
    CHECK(n.independent_marginals());

    auto mixed = InputSpec::independent({Marginal::uniform(0, 1), Marginal::uniform(2, 5)});
    CHECK(mixed.all_uniform());
    CHECK_FALSE(mixed.all_unit_uniform());

    CHECK_THROWS_AS((void)InputSpec::independent({}), ConfigError);
    CHECK_THROWS_AS((void)u.mean(), ConfigError);
    CHECK_THROWS_AS((void)u.covariance(), ConfigError);
}

TEST_CASE("correlated spec validates its covariance") {
    Matrix good(2, 2);
    good(0, 0) = 1.0;
    good(0, 1) = 0.9;
    good(1, 0) = 0.9;
    good(1, 1) = 1.0;
    auto spec = InputSpec::correlated_normal({0.0, 0.0}, good);
    CHECK_FALSE(spec.independent_marginals());
    CHECK(spec.factor_rank() == 2);
    CHECK_THROWS_AS((void)spec.marginals(), ConfigError);

    Matrix asym(2, 2);
    asym(0, 0) = 1.0;
    asym(0, 1) = 0.5;
    asym(1, 0) = 0.2;
    asym(1, 1) = 1.0;
    CHECK_THROWS_AS((void)InputSpec::correlated_normal({0.0, 0.0}, asym), ConfigError);

    // Indefinite: eigenvalues +1 and -1.
    Matrix indef(2, 2);
    indef(0, 0) = 0.0;
    indef(0, 1) = 1.0;
    indef(1, 0) = 1.0;
    indef(1, 1) = 0.0;
    CHECK_THROWS_AS((void)InputSpec::correlated_normal({0.0, 0.0}, indef), ConfigError);

    Matrix wrong(3, 3);
    CHECK_THROWS_AS((void)InputSpec::correlated_normal({0.0, 0.0}, wrong), ConfigError);
}

TEST_CASE("rank-deficient covariance factors to its true rank") {
    // v vᵀ + w wᵀ with v = (1,1,0), w = (0,0,2): rank 2 in d = 3.
    Matrix cov(3, 3);
    cov(0, 0) = 1.0;
    cov(0, 1) = 1.0;
    cov(1, 0) = 1.0;
    cov(1, 1) = 1.0;
    cov(2, 2) = 4.0;
    auto spec = InputSpec::correlated_normal({0.0, 0.0, 0.0}, cov);
    CHECK(spec.factor_rank() == 2);
    // factor · factorᵀ reproduces the covariance.
    const Matrix& f = spec.factor();
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < spec.factor_rank(); ++k) s += f(i, k) * f(j, k);
            CHECK(s == doctest::Approx(cov(i, j)).epsilon(1e-12));
        }
}

TEST_CASE("spec digests separate distinct specs") {
    auto a = InputSpec::unit_uniform(2);
    auto b = InputSpec::unit_uniform(2);
    CHECK(a.digest() == b.digest());
    CHECK(a.digest() != InputSpec::unit_uniform(3).digest());
    CHECK(a.digest() != InputSpec::standard_normal(2).digest());
    auto shifted = InputSpec::independent({Marginal::uniform(0, 1), Marginal::uniform(0, 1.5)});
    CHECK(a.digest() != shifted.digest());
}

TEST_CASE("sampling is deterministic and random-access") {
    auto spec = InputSpec::independent({Marginal::uniform(-1, 2), Marginal::normal(3, 0.5)});
    Matrix all = inputs::sample(spec, 10, 42);
    Matrix again = inputs::sample(spec, 10, 42);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 2; ++j) CHECK(all(i, j) == again(i, j));

    Sampler s(spec, 42);
    double row[2];
    s.row(5, std::span<double>(row, 2), {});
    CHECK(row[0] == all(5, 0));
    CHECK(row[1] == all(5, 1));

    Matrix other = inputs::sample(spec, 10, 43);
    bool any_diff = false;
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 2; ++j) any_diff |= other(i, j) != all(i, j);
    CHECK(any_diff);
}

TEST_CASE("sample moments match the marginals") {
    const std::size_t n = 20000;
    auto u = InputSpec::unit_uniform(2);
    Matrix su = inputs::sample(u, n, 7);
    for (std::size_t j = 0; j < 2; ++j) {
        double mean = 0.0, var = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += su(i, j);
        mean /= n;
        for (std::size_t i = 0; i < n; ++i) var += (su(i, j) - mean) * (su(i, j) - mean);
        var /= n - 1;
        CHECK(mean == doctest::Approx(0.5).epsilon(0.02));
        CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.05));
        for (std::size_t i = 0; i < n; ++i) {
            REQUIRE(su(i, j) >= 0.0);
            REQUIRE(su(i, j) <= 1.0);
        }
    }

    auto ranged = InputSpec::independent({Marginal::uniform(0.1, 0.4)});
    Matrix sr = inputs::sample(ranged, n, 8);
    for (std::size_t i = 0; i < n; ++i) {
        REQUIRE(sr(i, 0) >= 0.1);
        REQUIRE(sr(i, 0) <= 0.4);
    }

    auto nrm = InputSpec::standard_normal(1);
    Matrix sn = inputs::sample(nrm, n, 9);
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += sn(i, 0);
    mean /= n;
    for (std::size_t i = 0; i < n; ++i) var += (sn(i, 0) - mean) * (sn(i, 0) - mean);
    var /= n - 1;
    CHECK(std::fabs(mean) < 0.03);
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("correlated sampling reproduces the target correlation") {
    Matrix cov(2, 2);
    cov(0, 0) = 1.0;
    cov(0, 1) = 0.9;
    cov(1, 0) = 0.9;
    cov(1, 1) = 1.0;
    auto spec = InputSpec::correlated_normal({1.0, -2.0}, cov);
    const std::size_t n = 20000;
    Matrix s = inputs::sample(spec, n, 11);
    double m0 = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        m0 += s(i, 0);
        m1 += s(i, 1);
    }
    m0 /= n;
    m1 /= n;
    CHECK(m0 == doctest::Approx(1.0).epsilon(0.03));
    CHECK(m1 == doctest::Approx(-2.0).epsilon(0.03));
    double c00 = 0.0, c01 = 0.0, c11 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        c00 += (s(i, 0) - m0) * (s(i, 0) - m0);
        c01 += (s(i, 0) - m0) * (s(i, 1) - m1);
        c11 += (s(i, 1) - m1) * (s(i, 1) - m1);
    }
    double corr = c01 / std::sqrt(c00 * c11);
    CHECK(corr == doctest::Approx(0.9).epsilon(0.02));
}

TEST_CASE("quadrature nodes and weights") {
    auto spec1 = InputSpec::unit_uniform(1);
    auto g1 = QuadratureGrid::build(spec1, 1);
    CHECK(g1.node_count() == 1);
    double pt[1], w;
    g1.node(0, std::span<double>(pt, 1), w);
    CHECK(pt[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(w == doctest::Approx(1.0).epsilon(1e-15));

    auto g2 = QuadratureGrid::build(spec1, 2);
    const double off = 0.5 / std::sqrt(3.0);
    g2.node(0, std::span<double>(pt, 1), w);
    CHECK(pt[0] == doctest::Approx(0.5 - off).epsilon(1e-14));
    CHECK(w == doctest::Approx(0.5).epsilon(1e-14));
    g2.node(1, std::span<double>(pt, 1), w);
    CHECK(pt[0] == doctest::Approx(0.5 + off).epsilon(1e-14));
}

TEST_CASE("quadrature integrates polynomials exactly") {
    auto spec = InputSpec::unit_uniform(2);
    const std::size_t q = 5;
    auto grid = QuadratureGrid::build(spec, q);
    CHECK(grid.node_count() == q * q);

    // Each axis rule is exact for degree <= 2q - 1 = 9, so the mixed moments
    // E[x^a y^b] must come out as 1/((a+1)(b+1)) to roundoff.
    double pt[2], w;
    for (int a = 0; a <= 9; a += 3)
        for (int b = 0; b <= 9; b += 4) {
            double acc = 0.0, wsum = 0.0;
            for (std::uint64_t k = 0; k < grid.node_count(); ++k) {
                grid.node(k, std::span<double>(pt, 2), w);
                acc += w * std::pow(pt[0], a) * std::pow(pt[1], b);
                wsum += w;
            }
            double exact = 1.0 / ((a + 1.0) * (b + 1.0));
            CHECK(acc == doctest::Approx(exact).epsilon(1e-12));
            CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
        }
}

TEST_CASE("quadrature maps to general intervals") {
    auto spec = InputSpec::independent({Marginal::uniform(2, 6)});
    auto grid = QuadratureGrid::build(spec, 4);
    double pt[1], w;
    double mean = 0.0, second = 0.0;
    for (std::uint64_t k = 0; k < grid.node_count(); ++k) {
        grid.node(k, std::span<double>(pt, 1), w);
        REQUIRE(pt[0] > 2.0);
        REQUIRE(pt[0] < 6.0);
        mean += w * pt[0];
        second += w * pt[0] * pt[0];
    }
    CHECK(mean == doctest::Approx(4.0).epsilon(1e-13));
    // E[x^2] over U(2,6) = (6^3 - 2^3) / (3·4).
    CHECK(second == doctest::Approx(208.0 / 12.0).epsilon(1e-13));
}

TEST_CASE("quadrature budget and marginal guards") {
    auto spec8 = InputSpec::unit_uniform(8);
    CHECK_THROWS_AS((void)QuadratureGrid::build(spec8, 9), BudgetError);
    auto ok = QuadratureGrid::build(spec8, 8);
    CHECK(ok.node_count() == 16777216u);
    CHECK_THROWS_AS((void)ok.materialize_points(1000), BudgetError);

    CHECK_THROWS_AS((void)QuadratureGrid::build(InputSpec::standard_normal(2), 3), ConfigError);
    Matrix cov(2, 2);
    cov(0, 0) = cov(1, 1) = 1.0;
    CHECK_THROWS_AS(
        (void)QuadratureGrid::build(InputSpec::correlated_normal({0, 0}, cov), 3),
        ConfigError);
    CHECK_THROWS_AS((void)QuadratureGrid::build(InputSpec::unit_uniform(2), 0), ConfigError);
}

TEST_CASE("materialized grid matches lazy enumeration") {
    auto spec = InputSpec::unit_uniform(2);
    auto grid = QuadratureGrid::build(spec, 3);
    Matrix pts = grid.materialize_points();
    auto ws = grid.materialize_weights();
    REQUIRE(pts.rows() == 9);
    REQUIRE(ws.size() == 9);
    double pt[2], w;
    for (std::uint64_t k = 0; k < 9; ++k) {
        grid.node(k, std::span<double>(pt, 2), w);
        CHECK(pt[0] == pts(k, 0));
        CHECK(pt[1] == pts(k, 1));
        CHECK(w == ws[k]);
    }
}

TEST_CASE("transport constants for the supported marginals") {
    using std::numbers::pi;
    CHECK(inputs::kucherenko_constant(Marginal::uniform(0, 1)) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(inputs::kucherenko_constant(Marginal::uniform(2, 5)) ==
          doctest::Approx(9.0).epsilon(1e-12));
    CHECK(inputs::kucherenko_constant(Marginal::uniform(-3, 1)) ==
          doctest::Approx(16.0).epsilon(1e-12));
    // Normal: the sup sits at the median, giving 4·(1/2 / f(mean))² = 2πσ².
    CHECK(inputs::kucherenko_constant(Marginal::normal(0, 1)) ==
          doctest::Approx(2.0 * pi).epsilon(1e-6));
    CHECK(inputs::kucherenko_constant(Marginal::normal(7, 3)) ==
          doctest::Approx(18.0 * pi).epsilon(1e-6));
}
