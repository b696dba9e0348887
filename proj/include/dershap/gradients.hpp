#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dershap/expr.hpp"
#include "dershap/linalg.hpp"

namespace dershap::gradients {

/// Monotone evaluation counters, safe under concurrent increments.
/// model_evaluations counts underlying f(x) calls; gradient_evaluations
/// counts gradient requests. A finite-difference gradient costs d+1 model
/// evaluations (2d+1 central), so model >= gradient always.
class EvalCounter {
public:
    void add_model(std::uint64_t k = 1) noexcept {
        model_.fetch_add(k, std::memory_order_relaxed);
    }
    void add_gradient(std::uint64_t k = 1) noexcept {
        grad_.fetch_add(k, std::memory_order_relaxed);
    }
    std::uint64_t model_evaluations() const noexcept {
        return model_.load(std::memory_order_relaxed);
    }
    std::uint64_t gradient_evaluations() const noexcept {
        return grad_.load(std::memory_order_relaxed);
    }

private:
    std::atomic<std::uint64_t> model_{0};
    std::atomic<std::uint64_t> grad_{0};
};

/// Value-only black box f: R^d -> R. Wrappers count evaluations and
/// reject non-finite outputs (EvalError carrying the batch row index).
class ValueModel {
public:
    virtual ~ValueModel() = default;

    std::size_t dimension() const noexcept { return dimension_; }
    EvalCounter& counter() const noexcept { return counter_; }

    double eval_point(std::span<const double> x) const;
    /// `points` is row-major n × d; writes n values.
    void eval_batch(const double* points, std::size_t n, double* values) const;

protected:
    explicit ValueModel(std::size_t dimension) : dimension_(dimension) {}

    virtual double do_eval(std::span<const double> x) const = 0;
    virtual void do_eval_batch(const double* points, std::size_t n, double* values) const;

private:
    std::size_t dimension_;
    mutable EvalCounter counter_;
};

/// f given as a C++ callable.
class NativeValueModel final : public ValueModel {
public:
    NativeValueModel(std::size_t dimension, std::function<double(std::span<const double>)> fn)
        : ValueModel(dimension), fn_(std::move(fn)) {}

protected:
    double do_eval(std::span<const double> x) const override { return fn_(x); }

private:
    std::function<double(std::span<const double>)> fn_;
};

/// f given as a parsed expression (value route only; for gradients use
/// AdExpressionProvider).
class ExprValueModel final : public ValueModel {
public:
    explicit ExprValueModel(expr::ExprAst ast)
        : ValueModel(ast.arity()), ast_(std::move(ast)) {}

    const expr::ExprAst& ast() const noexcept { return ast_; }

protected:
    double do_eval(std::span<const double> x) const override;
    void do_eval_batch(const double* points, std::size_t n, double* values) const override;

private:
    expr::ExprAst ast_;
};

/// f implemented by a subprocess speaking the line protocol: one request
/// line of d space-separated decimal floats per point, one decimal float
/// reply line per point, ASCII, stream closed by EOF. Each batch call
/// spawns the command once (via /bin/sh -c) and streams every point
/// through that single process.
class ExternalValueModel final : public ValueModel {
public:
    ExternalValueModel(std::string command, std::size_t dimension)
        : ValueModel(dimension), command_(std::move(command)) {}

    const std::string& command() const noexcept { return command_; }
    std::uint64_t spawn_count() const noexcept {
        return spawns_.load(std::memory_order_relaxed);
    }

protected:
    double do_eval(std::span<const double> x) const override;
    void do_eval_batch(const double* points, std::size_t n, double* values) const override;

private:
    std::string command_;
    mutable std::atomic<std::uint64_t> spawns_{0};
};

/// Runs `command` once and streams all `points` through it, returning one
/// value per row in order. Raises EvalError on protocol violations:
/// nonzero exit, malformed or non-finite reply, count mismatch.
std::vector<double> external_model_call(const std::string& command, const double* points,
                                        std::size_t n, std::size_t dimension);

/// Uniform "value and gradient at a point" interface. Batch calls let
/// backends amortize per-call overhead (chiefly subprocess spawns).
/// Wrappers count evaluations and reject non-finite results.
class GradientProvider {
public:
    virtual ~GradientProvider() = default;

    std::size_t dimension() const noexcept { return dimension_; }
    EvalCounter& counter() const noexcept { return counter_; }

    double gradient_at(std::span<const double> x, std::span<double> gradient) const;
    /// `points`/`gradients` are row-major n × d.
    void gradient_batch(const double* points, std::size_t n, double* values,
                        double* gradients) const;

protected:
    explicit GradientProvider(std::size_t dimension) : dimension_(dimension) {}

    virtual double do_gradient(std::span<const double> x, std::span<double> gradient) const = 0;
    virtual void do_gradient_batch(const double* points, std::size_t n, double* values,
                                   double* gradients) const;

private:
    void check_finite(double value, const double* gradient, std::size_t row) const;

    std::size_t dimension_;
    mutable EvalCounter counter_;
};

/// Exact gradients from the expression tape. One model evaluation per
/// gradient: value and all partials come out of a single pass.
class AdExpressionProvider final : public GradientProvider {
public:
    explicit AdExpressionProvider(expr::ExprAst ast)
        : GradientProvider(ast.arity()), ast_(std::move(ast)) {}

    const expr::ExprAst& ast() const noexcept { return ast_; }

protected:
    double do_gradient(std::span<const double> x, std::span<double> gradient) const override;
    void do_gradient_batch(const double* points, std::size_t n, double* values,
                           double* gradients) const override;

private:
    expr::ExprAst ast_;
};

/// Finite differences over a value-only model. Forward differences
/// g_i = (f(x + h e_i) - f(x))/h with absolute increment h by default;
/// central differences cost 2d+1 model calls per gradient instead of d+1.
/// Batches forward the whole stencil to the model in one eval_batch call,
/// so external models see one spawn per batch, not one per point.
class FiniteDifferenceProvider final : public GradientProvider {
public:
    static constexpr double kDefaultIncrement = 1e-6;

    FiniteDifferenceProvider(std::shared_ptr<const ValueModel> model,
                             double increment = kDefaultIncrement, bool central = false);

    double increment() const noexcept { return h_; }
    bool central() const noexcept { return central_; }
    const ValueModel& model() const noexcept { return *model_; }

protected:
    double do_gradient(std::span<const double> x, std::span<double> gradient) const override;
    void do_gradient_batch(const double* points, std::size_t n, double* values,
                           double* gradients) const override;

private:
    std::size_t stencil_size() const noexcept {
        return central_ ? 2 * dimension() + 1 : dimension() + 1;
    }

    std::shared_ptr<const ValueModel> model_;
    double h_;
    bool central_;
};

}  // namespace dershap::gradients
