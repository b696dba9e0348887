#include "dershap/models.hpp"

#include <array>
#include <cmath>

#include "dershap/errors.hpp"

namespace dershap::models {

double ebola_r0(std::span<const double> x) {
    if (x.size() != 8) throw ConfigError("ebola_r0 takes 8 parameters");
    const double beta1 = x[0], beta2 = x[1], beta3 = x[2], rho1 = x[3];
    const double gamma1 = x[4], gamma2 = x[5], omega = x[6], psi = x[7];
    if (!(omega > 0.0)) throw EvalError("R0 domain violation: omega must be positive");
    if (!(gamma2 > 0.0)) throw EvalError("R0 domain violation: gamma2 must be positive");
    if (!(gamma1 + psi > 0.0)) {
        throw EvalError("R0 domain violation: gamma1 + psi must be positive");
    }
    return (beta1 + beta2 * rho1 * gamma1 / omega + beta3 * psi / gamma2) / (gamma1 + psi);
}

std::shared_ptr<const gradients::ValueModel> BuiltinModel::make_value_model() const {
    if (expression) return std::make_shared<gradients::ExprValueModel>(*expression);
    if (native) return std::make_shared<gradients::NativeValueModel>(dimension, native);
    throw ConfigError("model '" + id + "' has no evaluator");
}

namespace {

std::vector<std::string> index_names(std::size_t d) {
    std::vector<std::string> names(d);
    for (std::size_t i = 0; i < d; ++i) names[i] = "x" + std::to_string(i);
    return names;
}

BuiltinModel make_ebola(std::string id, bool sierra_leone) {
    std::vector<std::string> vars;
    std::vector<inputs::Marginal> marginals;
    for (const EbolaParameter& p : ebola_parameters()) {
        vars.emplace_back(p.name);
        marginals.push_back(sierra_leone
                                ? inputs::Marginal::uniform(p.sierra_leone_lo, p.sierra_leone_hi)
                                : inputs::Marginal::uniform(p.liberia_lo, p.liberia_hi));
    }
    const std::string text =
        "(beta1 + beta2*rho1*gamma1/omega + beta3*psi/gamma2)/(gamma1 + psi)";
    return BuiltinModel{
        .id = std::move(id),
        .dimension = vars.size(),
        .variables = vars,
        .expression = expr::ExprAst::parse(text, vars),
        .native = [](std::span<const double> x) { return ebola_r0(x); },
        .default_spec = inputs::InputSpec::independent(std::move(marginals)),
        .componentwise_linear = false,  // gamma1 and psi enter the denominator
        .smooth = true,
        .analytic = std::nullopt,
    };
}

BuiltinModel make_linear() {
    auto vars = index_names(2);
    AnalyticSobol a;
    a.main = {0.9, 0.1};
    a.total = {0.9, 0.1};
    a.sigma2 = 5.0 / 6.0;  // (9 + 1)/12
    return BuiltinModel{
        .id = "linear",
        .dimension = 2,
        .variables = vars,
        .expression = expr::ExprAst::parse("3*x0 + x1", vars),
        .native = nullptr,
        .default_spec = inputs::InputSpec::unit_uniform(2),
        .componentwise_linear = true,
        .smooth = true,
        .analytic = std::move(a),
    };
}

BuiltinModel make_bilinear() {
    auto vars = index_names(2);
    AnalyticSobol a;
    a.main = {3.0 / 7.0, 3.0 / 7.0};
    a.total = {4.0 / 7.0, 4.0 / 7.0};
    a.sigma2 = 7.0 / 144.0;
    return BuiltinModel{
        .id = "bilinear",
        .dimension = 2,
        .variables = vars,
        .expression = expr::ExprAst::parse("x0*x1", vars),
        .native = nullptr,
        .default_spec = inputs::InputSpec::unit_uniform(2),
        .componentwise_linear = true,  // linear in each coordinate separately
        .smooth = true,
        .analytic = std::move(a),
    };
}

BuiltinModel make_additive_sine() {
    constexpr std::array<double, 3> amp{1.0, 0.7, 0.4};
    auto vars = index_names(3);
    // Each term contributes a_i^2/2 to the variance; additivity makes
    // main and total coincide.
    double sum_sq = 0.0;
    for (double c : amp) sum_sq += c * c;
    AnalyticSobol a;
    for (double c : amp) {
        a.main.push_back(c * c / sum_sq);
        a.total.push_back(c * c / sum_sq);
    }
    a.sigma2 = sum_sq / 2.0;
    return BuiltinModel{
        .id = "additive_sine",
        .dimension = 3,
        .variables = vars,
        .expression = expr::ExprAst::parse(
            "sin(2*pi*x0) + 0.7*sin(2*pi*x1) + 0.4*sin(2*pi*x2)", vars),
        .native = nullptr,
        .default_spec = inputs::InputSpec::unit_uniform(3),
        .componentwise_linear = false,
        .smooth = true,
        .analytic = std::move(a),
    };
}

BuiltinModel make_sobol_g() {
    constexpr std::array<double, 4> ga{0.0, 1.0, 4.5, 9.0};
    const std::size_t d = ga.size();
    std::vector<double> v(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = 1.0 / (3.0 * (1.0 + ga[i]) * (1.0 + ga[i]));
    double prod = 1.0;
    for (double vi : v) prod *= 1.0 + vi;
    AnalyticSobol a;
    a.sigma2 = prod - 1.0;
    for (std::size_t i = 0; i < d; ++i) {
        a.main.push_back(v[i] / a.sigma2);
        a.total.push_back(v[i] * (prod / (1.0 + v[i])) / a.sigma2);
    }
    return BuiltinModel{
        .id = "sobol_g",
        .dimension = d,
        .variables = index_names(d),
        .expression = std::nullopt,  // |4x-2| kinks: value-only by design
        .native =
            [ga](std::span<const double> x) {
                double p = 1.0;
                for (std::size_t i = 0; i < ga.size(); ++i) {
                    p *= (std::fabs(4.0 * x[i] - 2.0) + ga[i]) / (1.0 + ga[i]);
                }
                return p;
            },
        .default_spec = inputs::InputSpec::unit_uniform(d),
        .componentwise_linear = false,
        .smooth = false,
        .analytic = std::move(a),
    };
}

}  // namespace

const std::vector<BuiltinModel>& builtin_catalog() {
    static const std::vector<BuiltinModel> catalog = [] {
        std::vector<BuiltinModel> c;
        c.push_back(make_ebola("ebola_liberia", false));
        c.push_back(make_ebola("ebola_sierra_leone", true));
        c.push_back(make_linear());
        c.push_back(make_bilinear());
        c.push_back(make_additive_sine());
        c.push_back(make_sobol_g());
        return c;
    }();
    return catalog;
}

const BuiltinModel* find_builtin(std::string_view id) {
    for (const BuiltinModel& m : builtin_catalog()) {
        if (m.id == id) return &m;
    }
    return nullptr;
}

}  // namespace dershap::models
