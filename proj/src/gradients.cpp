#include "dershap/gradients.hpp"

#include <cmath>
#include <string>

#include "dershap/errors.hpp"

namespace dershap::gradients {

double ValueModel::eval_point(std::span<const double> x) const {
    if (x.size() != dimension_) {
        throw ConfigError("evaluation point has length " + std::to_string(x.size()) +
                          ", model expects " + std::to_string(dimension_));
    }
    counter_.add_model(1);
    double v = do_eval(x);
    if (!std::isfinite(v)) {
        throw EvalError("model returned non-finite value");
    }
    return v;
}

void ValueModel::eval_batch(const double* points, std::size_t n, double* values) const {
    counter_.add_model(n);
    do_eval_batch(points, n, values);
    for (std::size_t r = 0; r < n; ++r) {
        if (!std::isfinite(values[r])) {
            throw EvalError("model returned non-finite value",
                            static_cast<std::int64_t>(r));
        }
    }
}

void ValueModel::do_eval_batch(const double* points, std::size_t n, double* values) const {
    for (std::size_t r = 0; r < n; ++r) {
        values[r] = do_eval({points + r * dimension(), dimension()});
    }
}

double ExprValueModel::do_eval(std::span<const double> x) const { return ast_.eval(x); }

void ExprValueModel::do_eval_batch(const double* points, std::size_t n, double* values) const {
    expr::ExprAst::Workspace ws;
    for (std::size_t r = 0; r < n; ++r) {
        values[r] = ast_.eval({points + r * dimension(), dimension()}, ws);
    }
}

double ExternalValueModel::do_eval(std::span<const double> x) const {
    spawns_.fetch_add(1, std::memory_order_relaxed);
    return external_model_call(command_, x.data(), 1, dimension())[0];
}

void ExternalValueModel::do_eval_batch(const double* points, std::size_t n,
                                       double* values) const {
    spawns_.fetch_add(1, std::memory_order_relaxed);
    std::vector<double> out = external_model_call(command_, points, n, dimension());
    std::copy(out.begin(), out.end(), values);
}

double GradientProvider::gradient_at(std::span<const double> x,
                                     std::span<double> gradient) const {
    if (x.size() != dimension_ || gradient.size() != dimension_) {
        throw ConfigError("gradient call with mismatched point length, expected " +
                          std::to_string(dimension_));
    }
    counter_.add_gradient(1);
    double v = do_gradient(x, gradient);
    check_finite(v, gradient.data(), 0);
    return v;
}

void GradientProvider::gradient_batch(const double* points, std::size_t n, double* values,
                                      double* gradients) const {
    counter_.add_gradient(n);
    do_gradient_batch(points, n, values, gradients);
    for (std::size_t r = 0; r < n; ++r) {
        check_finite(values[r], gradients + r * dimension_, r);
    }
}

void GradientProvider::do_gradient_batch(const double* points, std::size_t n, double* values,
                                         double* gradients) const {
    for (std::size_t r = 0; r < n; ++r) {
        values[r] = do_gradient({points + r * dimension_, dimension_},
                                {gradients + r * dimension_, dimension_});
    }
}

void GradientProvider::check_finite(double value, const double* gradient,
                                    std::size_t row) const {
    if (!std::isfinite(value)) {
        throw EvalError("gradient evaluation produced non-finite value",
                        static_cast<std::int64_t>(row));
    }
    for (std::size_t i = 0; i < dimension_; ++i) {
        if (!std::isfinite(gradient[i])) {
            throw EvalError("gradient evaluation produced non-finite partial for index " +
                                std::to_string(i),
                            static_cast<std::int64_t>(row));
        }
    }
}

double AdExpressionProvider::do_gradient(std::span<const double> x,
                                         std::span<double> gradient) const {
    counter().add_model(1);
    return ast_.eval_with_gradient(x, gradient);
}

void AdExpressionProvider::do_gradient_batch(const double* points, std::size_t n,
                                             double* values, double* gradients) const {
    counter().add_model(n);
    expr::ExprAst::Workspace ws;
    const std::size_t d = dimension();
    for (std::size_t r = 0; r < n; ++r) {
        values[r] = ast_.eval_with_gradient({points + r * d, d}, {gradients + r * d, d}, ws);
    }
}

FiniteDifferenceProvider::FiniteDifferenceProvider(std::shared_ptr<const ValueModel> model,
                                                   double increment, bool central)
    : GradientProvider(model->dimension()), model_(std::move(model)), h_(increment),
      central_(central) {
    if (!(h_ > 0.0)) {
        throw ConfigError("finite-difference increment must be positive");
    }
}

double FiniteDifferenceProvider::do_gradient(std::span<const double> x,
                                             std::span<double> gradient) const {
    double value;
    do_gradient_batch(x.data(), 1, &value, gradient.data());
    return value;
}

void FiniteDifferenceProvider::do_gradient_batch(const double* points, std::size_t n,
                                                 double* values, double* gradients) const {
    const std::size_t d = dimension();
    const std::size_t s = stencil_size();
    counter().add_model(n * s);

    // Stencil rows for a block of points are forwarded to the model in one
    // batch call (base point first, then the perturbed points), so external
    // models see one spawn per block instead of one per evaluation. The
    // block cap keeps the stencil buffer modest for very large batches.
    constexpr std::size_t kBlockRows = 8192;
    Matrix stencil(std::min(n, kBlockRows) * s, d);
    std::vector<double> y(std::min(n, kBlockRows) * s);

    for (std::size_t base = 0; base < n; base += kBlockRows) {
        const std::size_t m = std::min(kBlockRows, n - base);
        for (std::size_t r = 0; r < m; ++r) {
            const double* x = points + (base + r) * d;
            double* block = stencil.row(r * s);
            std::copy(x, x + d, block);
            if (!central_) {
                for (std::size_t i = 0; i < d; ++i) {
                    double* row = block + (1 + i) * d;
                    std::copy(x, x + d, row);
                    row[i] += h_;
                }
            } else {
                for (std::size_t i = 0; i < d; ++i) {
                    double* plus = block + (1 + 2 * i) * d;
                    double* minus = block + (2 + 2 * i) * d;
                    std::copy(x, x + d, plus);
                    std::copy(x, x + d, minus);
                    plus[i] += h_;
                    minus[i] -= h_;
                }
            }
        }

        try {
            model_->eval_batch(stencil.row(0), m * s, y.data());
        } catch (const EvalError& e) {
            // Map the stencil row back to the sample point it perturbs.
            if (e.row() >= 0) {
                throw EvalError(std::string(e.what()),
                                static_cast<std::int64_t>(
                                    base + static_cast<std::size_t>(e.row()) / s));
            }
            throw;
        }

        for (std::size_t r = 0; r < m; ++r) {
            const double* yr = y.data() + r * s;
            values[base + r] = yr[0];
            double* g = gradients + (base + r) * d;
            if (!central_) {
                for (std::size_t i = 0; i < d; ++i) g[i] = (yr[1 + i] - yr[0]) / h_;
            } else {
                for (std::size_t i = 0; i < d; ++i) {
                    g[i] = (yr[1 + 2 * i] - yr[2 + 2 * i]) / (2.0 * h_);
                }
            }
        }
    }
}

}  // namespace dershap::gradients
