#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "doctest.h"
#include "test_support.hpp"

#include "dershap/errors.hpp"
#include "dershap/gradients.hpp"
#include "dershap/inputs.hpp"
#include "dershap/models.hpp"
#include "dershap/oracles.hpp"
#include "dershap/rng.hpp"

using namespace dershap;
using models::BuiltinModel;
using models::builtin_catalog;
using models::ebola_parameters;
using models::ebola_r0;
using models::find_builtin;

TEST_CASE("parameter table is frozen") {
    // Any edit to the epidemiological ranges must be deliberate: this
    // checksum covers every name and bound in the table.
    CHECK(models::ebola_table_digest() == 0x81b2adca1f3cafffull);

    auto params = ebola_parameters();
    REQUIRE(params.size() == 8);
    CHECK(params[0].name == std::string("beta1"));
    CHECK(params[3].name == std::string("rho1"));
    CHECK(params[7].name == std::string("psi"));
    // Spot values straight from the table.
    CHECK(params[4].liberia_lo == 0.0276);
    CHECK(params[4].liberia_hi == 0.1702);
    CHECK(params[4].sierra_leone_lo == 0.0275);
    CHECK(params[4].sierra_leone_hi == 0.1569);
    CHECK(params[5].sierra_leone_lo == 0.1236);
    CHECK(params[5].sierra_leone_hi == 0.384);
}

TEST_CASE("reproduction number closed form") {
    // (β₁ + β₂ρ₁γ₁/ω + β₃ψ/γ₂)/(γ₁ + ψ) at all-ones is (1+1+1)/2.
    std::vector<double> ones(8, 1.0);
    CHECK(ebola_r0(ones) == doctest::Approx(1.5).epsilon(1e-15));

    // With β₂ = β₃ = 0 the value collapses to β₁/(γ₁ + ψ).
    std::vector<double> x = {0.2, 0.0, 0.0, 0.7, 0.09, 0.15, 0.3, 0.4};
    CHECK(ebola_r0(x) == doctest::Approx(0.2 / (0.09 + 0.4)).epsilon(1e-14));

    std::vector<double> seven(7, 1.0);
    CHECK_THROWS_AS((void)ebola_r0(seven), ConfigError);

    std::vector<double> bad = ones;
    bad[6] = 0.0;  // omega
    CHECK_THROWS_AS((void)ebola_r0(bad), EvalError);
    bad = ones;
    bad[5] = 0.0;  // gamma2
    CHECK_THROWS_AS((void)ebola_r0(bad), EvalError);
    bad = ones;
    bad[4] = bad[7] = 0.0;  // gamma1 + psi
    CHECK_THROWS_AS((void)ebola_r0(bad), EvalError);
}

TEST_CASE("catalog enumerates the expected models") {
    auto cat = builtin_catalog();
    REQUIRE(cat.size() == 6);
    CHECK(find_builtin("ebola_liberia") != nullptr);
    CHECK(find_builtin("ebola_sierra_leone") != nullptr);
    CHECK(find_builtin("linear") != nullptr);
    CHECK(find_builtin("bilinear") != nullptr);
    CHECK(find_builtin("additive_sine") != nullptr);
    CHECK(find_builtin("sobol_g") != nullptr);
    CHECK(find_builtin("no_such_model") == nullptr);

    const BuiltinModel* lin = find_builtin("linear");
    CHECK(lin->dimension == 2);
    CHECK(lin->componentwise_linear);
    CHECK(lin->smooth);
    REQUIRE(lin->analytic.has_value());
    CHECK(lin->analytic->total[0] == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(lin->analytic->sigma2 == doctest::Approx(10.0 / 12.0).epsilon(1e-12));

    const BuiltinModel* g = find_builtin("sobol_g");
    CHECK(g->dimension == 4);
    CHECK_FALSE(g->smooth);
    CHECK_FALSE(g->expression.has_value());

    const BuiltinModel* eb = find_builtin("ebola_liberia");
    REQUIRE(eb->variables.size() == 8);
    CHECK(eb->variables[0] == "beta1");
    CHECK(eb->variables[7] == "psi");
    CHECK_FALSE(eb->componentwise_linear);
    CHECK(eb->default_spec.all_uniform());
    // Spec bounds mirror the table.
    auto params = ebola_parameters();
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(eb->default_spec.marginals()[i].p0 == params[i].liberia_lo);
        CHECK(eb->default_spec.marginals()[i].p1 == params[i].liberia_hi);
    }
    const BuiltinModel* sl = find_builtin("ebola_sierra_leone");
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(sl->default_spec.marginals()[i].p0 == params[i].sierra_leone_lo);
        CHECK(sl->default_spec.marginals()[i].p1 == params[i].sierra_leone_hi);
    }
}

TEST_CASE("expression and native routes agree for the epidemic model") {
    const BuiltinModel* eb = find_builtin("ebola_liberia");
    REQUIRE(eb->expression.has_value());
    REQUIRE(static_cast<bool>(eb->native));
    Matrix pts = inputs::sample(eb->default_spec, 200, 12);
    for (std::size_t r = 0; r < 200; ++r) {
        std::span<const double> x(pts.row(r), 8);
        double via_expr = eb->expression->eval(x);
        double via_native = eb->native(x);
        REQUIRE(std::fabs(via_expr - via_native) <=
                1e-14 * std::max(1.0, std::fabs(via_native)));
    }
}

TEST_CASE("reproduction number is positive across both parameter boxes") {
    for (const char* id : {"ebola_liberia", "ebola_sierra_leone"}) {
        const BuiltinModel* eb = find_builtin(id);
        // All 2^8 corners.
        const auto& marg = eb->default_spec.marginals();
        for (unsigned corner = 0; corner < 256; ++corner) {
            double x[8];
            for (unsigned i = 0; i < 8; ++i)
                x[i] = (corner >> i) & 1u ? marg[i].p1 : marg[i].p0;
            REQUIRE(ebola_r0(std::span<const double>(x, 8)) > 0.0);
        }
        // And a random sweep of the interior.
        Matrix pts = inputs::sample(eb->default_spec, 10000, 77);
        for (std::size_t r = 0; r < pts.rows(); ++r)
            REQUIRE(ebola_r0(std::span<const double>(pts.row(r), 8)) > 0.0);
    }
}

TEST_CASE("epidemic gradients match central differences at the midpoint") {
    const BuiltinModel* eb = find_builtin("ebola_liberia");
    gradients::AdExpressionProvider ad(*eb->expression);
    auto native = std::make_shared<gradients::NativeValueModel>(8, eb->native);
    gradients::FiniteDifferenceProvider fd(native, 1e-5, true);

    const auto& marg = eb->default_spec.marginals();
    double x[8];
    for (unsigned i = 0; i < 8; ++i) x[i] = 0.5 * (marg[i].p0 + marg[i].p1);
    double ga[8], gf[8];
    double va = ad.gradient_at(std::span<const double>(x, 8), std::span<double>(ga, 8));
    double vf = fd.gradient_at(std::span<const double>(x, 8), std::span<double>(gf, 8));
    CHECK(va == doctest::Approx(vf).epsilon(1e-12));
    double scale = 1.0;
    for (double g : ga) scale = std::max(scale, std::fabs(g));
    for (unsigned i = 0; i < 8; ++i) REQUIRE(std::fabs(ga[i] - gf[i]) <= 1e-5 * scale);
}

TEST_CASE("value models built from the catalog carry the right dimension") {
    for (const auto& m : builtin_catalog()) {
        auto vm = m.make_value_model();
        REQUIRE(vm != nullptr);
        CHECK(vm->dimension() == m.dimension);
        Matrix pts = inputs::sample(m.default_spec, 10, 3);
        std::vector<double> vals(10);
        vm->eval_batch(pts.row(0), 10, vals.data());
        for (double v : vals) CHECK(std::isfinite(v));
    }
}

TEST_CASE("interaction test function has the documented closed forms") {
    const BuiltinModel* g = find_builtin("sobol_g");
    // Π (|4x_i − 2| + a_i)/(1 + a_i) with a = (0, 1, 4.5, 9).
    double mid[4] = {0.5, 0.5, 0.5, 0.5};
    auto vm = g->make_value_model();
    CHECK(vm->eval_point(std::span<const double>(mid, 4)) == doctest::Approx(0.0).scale(1.0));
    double ones[4] = {1, 1, 1, 1};
    CHECK(vm->eval_point(std::span<const double>(ones, 4)) ==
          doctest::Approx(3.9).epsilon(1e-12));

    REQUIRE(g->analytic.has_value());
    const double a[4] = {0.0, 1.0, 4.5, 9.0};
    double prod = 1.0;
    for (int i = 0; i < 4; ++i) {
        double vi = 1.0 / (3.0 * (1.0 + a[i]) * (1.0 + a[i]));
        prod *= 1.0 + vi;
        CHECK(g->analytic->main[i] * g->analytic->sigma2 ==
              doctest::Approx(vi).epsilon(1e-10));
    }
    CHECK(g->analytic->sigma2 == doctest::Approx(prod - 1.0).epsilon(1e-10));
}

TEST_CASE("analytic indices agree with the pick-freeze estimator") {
    for (const char* id : {"sobol_g", "additive_sine", "bilinear"}) {
        const BuiltinModel* m = find_builtin(id);
        REQUIRE(m->analytic.has_value());
        auto vm = m->make_value_model();
        auto est = oracles::sobol_estimate(*vm, m->default_spec, 100000, 19);
        REQUIRE_FALSE(est.degenerate);
        CHECK(est.sigma2 ==
              doctest::Approx(m->analytic->sigma2).epsilon(0.05));
        for (std::size_t i = 0; i < m->dimension; ++i) {
            REQUIRE_MESSAGE(std::fabs(est.main[i] - m->analytic->main[i]) <=
                                std::max(3.0 * est.se_main[i], 0.02),
                            id << " main index " << i);
            REQUIRE_MESSAGE(std::fabs(est.total[i] - m->analytic->total[i]) <=
                                std::max(3.0 * est.se_total[i], 0.02),
                            id << " total index " << i);
        }
    }
}
