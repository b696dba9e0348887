#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "test_support.hpp"

#include "dershap/errors.hpp"
#include "dershap/expr.hpp"
#include "dershap/gradients.hpp"
#include "dershap/inputs.hpp"
#include "dershap/measures.hpp"
#include "dershap/oracles.hpp"

using namespace dershap;
using gradients::ExprValueModel;
using gradients::NativeValueModel;
using inputs::InputSpec;

namespace {

SymMatrix bilinear_abs() {
    SymMatrix c(2);
    c.at(0, 0) = 1.0 / 3.0;
    c.at(1, 0) = 1.0 / 4.0;
    c.at(1, 1) = 1.0 / 3.0;
    return c;
}

double imp_full(const SymMatrix& c) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.dim(); ++i) {
        s += c(i, i);
        for (std::size_t j = 0; j < i; ++j) s += std::fabs(c(i, j));
    }
    return s;
}

}  // namespace

TEST_CASE("subset importance by direct summation") {
    auto c = bilinear_abs();
    CHECK(oracles::imp(c, 0u) == 0.0);
    CHECK(oracles::imp(c, 0b01u) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(oracles::imp(c, 0b10u) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(oracles::imp(c, 0b11u) == doctest::Approx(11.0 / 12.0).epsilon(1e-15));
}

TEST_CASE("subset importance is additive in the matrix argument") {
    SymMatrix a = testsup::random_psd(5, 10).abs();
    SymMatrix b = testsup::random_psd(5, 11).abs();
    SymMatrix sum(5);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j <= i; ++j) sum.at(i, j) = a(i, j) + b(i, j);
    for (std::uint32_t u = 0; u < 32; ++u) {
        double lhs = oracles::imp(sum, u);
        double rhs = oracles::imp(a, u) + oracles::imp(b, u);
        CHECK(std::fabs(lhs - rhs) <= 1e-12 * std::max(1.0, std::fabs(rhs)));
    }
}

TEST_CASE("exact Shapley enumeration on small closed forms") {
    auto one = SymMatrix(1);
    one.at(0, 0) = 2.5;
    auto s1 = oracles::shapley_exact(one);
    CHECK(s1.values[0] == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(s1.imp_calls == 2u);

    auto s2 = oracles::shapley_exact(bilinear_abs());
    CHECK(s2.values[0] == doctest::Approx(11.0 / 24.0).epsilon(1e-12));
    CHECK(s2.values[1] == doctest::Approx(11.0 / 24.0).epsilon(1e-12));
    CHECK(s2.imp_calls == 8u);
}

TEST_CASE("enumeration cost is exactly d·2^d importance calls") {
    for (std::size_t d : {3u, 5u, 7u}) {
        SymMatrix c = testsup::random_psd(d, 40 + d).abs();
        auto s = oracles::shapley_exact(c);
        CHECK(s.imp_calls == static_cast<std::uint64_t>(d) << d);
    }
    SymMatrix big(25);
    for (std::size_t i = 0; i < 25; ++i) big.at(i, i) = 1.0;
    CHECK_THROWS_AS((void)oracles::shapley_exact(big), BudgetError);
}

TEST_CASE("Shapley axioms hold for the enumerated values") {
    for (int rep = 0; rep < 50; ++rep) {
        std::size_t d = 2 + static_cast<std::size_t>(rep % 7);
        SymMatrix c = testsup::random_psd(d, 0xace0 + static_cast<std::uint64_t>(rep)).abs();
        auto s = oracles::shapley_exact(c);

        // Efficiency.
        double sum = std::accumulate(s.values.begin(), s.values.end(), 0.0);
        double full = imp_full(c);
        REQUIRE(std::fabs(sum - full) <= 1e-10 * std::max(1.0, std::fabs(full)));

        // Dummy: zeroing a row removes that input's share entirely.
        SymMatrix dummy = c;
        for (std::size_t j = 0; j < d; ++j)
            dummy.at(std::max<std::size_t>(1, j), std::min<std::size_t>(1, j)) = 0.0;
        auto sd = oracles::shapley_exact(dummy);
        REQUIRE(sd.values[1] == 0.0);

        // Symmetry: swapping two inputs permutes the values.
        SymMatrix swapped(d);
        auto perm = [d](std::size_t i) { return i == 0 ? d - 1 : i == d - 1 ? 0 : i; };
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j <= i; ++j) {
                std::size_t pi = perm(i), pj = perm(j);
                swapped.at(std::max(pi, pj), std::min(pi, pj)) = c(i, j);
            }
        auto ss = oracles::shapley_exact(swapped);
        for (std::size_t i = 0; i < d; ++i)
            REQUIRE(ss.values[perm(i)] == doctest::Approx(s.values[i]).epsilon(1e-10));
    }
}

TEST_CASE("enumerated values are additive across matrices") {
    SymMatrix a = testsup::random_psd(6, 71).abs();
    SymMatrix b = testsup::random_psd(6, 72).abs();
    SymMatrix sum(6);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j <= i; ++j) sum.at(i, j) = a(i, j) + b(i, j);
    auto sa = oracles::shapley_exact(a);
    auto sb = oracles::shapley_exact(b);
    auto sc = oracles::shapley_exact(sum);
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(sc.values[i] == doctest::Approx(sa.values[i] + sb.values[i]).epsilon(1e-11));
}

TEST_CASE("closed form agrees with enumeration over random matrices") {
    for (int rep = 0; rep < 50; ++rep) {
        std::size_t d = 2 + static_cast<std::size_t>(rep % 9);
        SymMatrix c = testsup::random_psd(d, 0xbeef00 + static_cast<std::uint64_t>(rep));
        auto closed = measures::dershap(c);
        auto exact = oracles::shapley_exact(c.abs());
        for (std::size_t i = 0; i < d; ++i)
            REQUIRE(std::fabs(closed.values[i] - exact.values[i]) <= 1e-10);
    }
}

TEST_CASE("pick-freeze indices for a linear model") {
    ExprValueModel m(expr::ExprAst::parse("3*x0 + x1", {"x0", "x1"}));
    auto spec = InputSpec::unit_uniform(2);
    auto est = oracles::sobol_estimate(m, spec, 10000, 5);
    REQUIRE_FALSE(est.degenerate);
    CHECK(est.model_evaluations == 10000u * 4u);
    CHECK(m.counter().model_evaluations() == 10000u * 4u);
    CHECK(est.sigma2 == doctest::Approx(10.0 / 12.0).epsilon(0.05));
    CHECK(est.total[0] == doctest::Approx(0.9).epsilon(0.03));
    CHECK(est.total[1] == doctest::Approx(0.1).epsilon(0.15));
    CHECK(est.main[0] == doctest::Approx(0.9).epsilon(0.03));
    CHECK(est.main[1] == doctest::Approx(0.1).epsilon(0.15));
    for (int i = 0; i < 2; ++i) {
        CHECK(est.se_total[i] > 0.0);
        CHECK(est.se_main[i] > 0.0);
        CHECK(est.main[i] >= 0.0);
        CHECK(est.main[i] <= est.total[i] + 3.0 * (est.se_main[i] + est.se_total[i]));
    }
}

TEST_CASE("pick-freeze indices for the bilinear model") {
    ExprValueModel m(expr::ExprAst::parse("x0*x1", {"x0", "x1"}));
    auto spec = InputSpec::unit_uniform(2);
    auto est = oracles::sobol_estimate(m, spec, 100000, 6);
    CHECK(est.main[0] == doctest::Approx(3.0 / 7.0).epsilon(0.03));
    CHECK(est.total[0] == doctest::Approx(4.0 / 7.0).epsilon(0.03));
    CHECK(est.main[1] == doctest::Approx(3.0 / 7.0).epsilon(0.03));
    CHECK(est.total[1] == doctest::Approx(4.0 / 7.0).epsilon(0.03));
    CHECK(est.sigma2 == doctest::Approx(7.0 / 144.0).epsilon(0.05));
}

TEST_CASE("an additive model closes the main-total gap") {
    ExprValueModel m(expr::ExprAst::parse("sin(2*pi*x0) + 0.5*cos(2*pi*x1)", {"x0", "x1"}));
    auto est = oracles::sobol_estimate(m, InputSpec::unit_uniform(2), 20000, 9);
    for (int i = 0; i < 2; ++i)
        CHECK(std::fabs(est.total[i] - est.main[i]) <=
              3.0 * (est.se_total[i] + est.se_main[i]) + 0.01);
}

TEST_CASE("estimates are reproducible per seed") {
    ExprValueModel m(expr::ExprAst::parse("x0*x1", {"x0", "x1"}));
    auto spec = InputSpec::unit_uniform(2);
    auto a = oracles::sobol_estimate(m, spec, 2000, 33);
    auto b = oracles::sobol_estimate(m, spec, 2000, 33);
    CHECK(a.total == b.total);
    CHECK(a.main == b.main);
    CHECK(a.sigma2 == b.sigma2);
    auto c = oracles::sobol_estimate(m, spec, 2000, 34);
    CHECK(a.total != c.total);
}

TEST_CASE("batch standard errors shrink like n^(-1/2)") {
    ExprValueModel m(expr::ExprAst::parse("x0*x1 + x1*x2", {"x0", "x1", "x2"}));
    auto spec = InputSpec::unit_uniform(3);
    auto small = oracles::sobol_estimate(m, spec, 4000, 55);
    auto large = oracles::sobol_estimate(m, spec, 16000, 55);
    // Ten batches make each individual s.e. noisy; the geometric mean
    // across indices should still sit near the theoretical factor 2.
    double log_ratio = 0.0;
    for (int i = 0; i < 3; ++i)
        log_ratio += std::log(small.se_total[i] / large.se_total[i]) / 3.0;
    double ratio = std::exp(log_ratio);
    CHECK(ratio > 1.4);
    CHECK(ratio < 2.9);
}

TEST_CASE("a constant model degenerates cleanly") {
    NativeValueModel m(2, [](std::span<const double>) { return 42.0; });
    auto est = oracles::sobol_estimate(m, InputSpec::unit_uniform(2), 2000, 1);
    CHECK(est.degenerate);
    CHECK(est.total == std::vector<double>{0.0, 0.0});
    CHECK(est.main == std::vector<double>{0.0, 0.0});
}

TEST_CASE("pick-freeze guards") {
    ExprValueModel m(expr::ExprAst::parse("x0*x1", {"x0", "x1"}));
    CHECK_THROWS_AS((void)oracles::sobol_estimate(m, InputSpec::unit_uniform(2), 999, 1),
                    ConfigError);
    CHECK_THROWS_AS((void)oracles::sobol_estimate(m, InputSpec::unit_uniform(3), 2000, 1),
                    ConfigError);
    Matrix cov(2, 2);
    cov(0, 0) = cov(1, 1) = 1.0;
    auto corr = InputSpec::correlated_normal({0.0, 0.0}, cov);
    CHECK_THROWS_AS((void)oracles::sobol_estimate(m, corr, 2000, 1), ConfigError);
}
