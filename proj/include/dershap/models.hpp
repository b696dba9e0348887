#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dershap/expr.hpp"
#include "dershap/gradients.hpp"
#include "dershap/inputs.hpp"

namespace dershap::models {

/// Basic reproduction number of the Ebola transmission model in the
/// parameter order [beta1, beta2, beta3, rho1, gamma1, gamma2, omega, psi]:
///   R0 = (beta1 + beta2*rho1*gamma1/omega + beta3*psi/gamma2) / (gamma1 + psi)
/// Denominators must be positive; violations raise EvalError.
double ebola_r0(std::span<const double> x);

/// One row of the Ebola parameter table. Both study regions use uniform
/// ranges; they differ only in the two recovery rates.
struct EbolaParameter {
    const char* name;
    double liberia_lo, liberia_hi;
    double sierra_leone_lo, sierra_leone_hi;
};
std::span<const EbolaParameter> ebola_parameters();

/// Fingerprint of the transcribed table, frozen in a test so silent edits
/// to the ranges are caught.
std::uint64_t ebola_table_digest();

/// Exact Sobol indices, available for models with closed-form ANOVA.
struct AnalyticSobol {
    std::vector<double> main;
    std::vector<double> total;
    double sigma2 = 0.0;
};

/// A named model with its default input distribution and declared
/// structure. `expression` enables the exact-gradient route; `native` is
/// a direct evaluator (the only route for non-smooth models, and a second
/// independent route where both exist).
struct BuiltinModel {
    std::string id;
    std::size_t dimension = 0;
    std::vector<std::string> variables;
    std::optional<expr::ExprAst> expression;
    std::function<double(std::span<const double>)> native;
    inputs::InputSpec default_spec;
    bool componentwise_linear = false;
    bool smooth = true;
    std::optional<AnalyticSobol> analytic;

    /// Value-only view; prefers the expression route when present.
    std::shared_ptr<const gradients::ValueModel> make_value_model() const;
};

/// All built-in models, constructed once.
const std::vector<BuiltinModel>& builtin_catalog();

/// Catalog lookup by id; nullptr when absent.
const BuiltinModel* find_builtin(std::string_view id);

}  // namespace dershap::models
