#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dershap/linalg.hpp"

namespace dershap::inputs {

/// One-dimensional marginal distribution.
struct Marginal {
    enum class Kind { Uniform, Normal };
    Kind kind;
    double p0;  // uniform: lower bound a; normal: mean
    double p1;  // uniform: upper bound b; normal: standard deviation

    static Marginal uniform(double a, double b);
    static Marginal normal(double mean, double stddev);

    bool is_uniform() const noexcept { return kind == Kind::Uniform; }
    bool is_unit_uniform() const noexcept {
        return kind == Kind::Uniform && p0 == 0.0 && p1 == 1.0;
    }
};

/// Joint input distribution: either independent marginals or a correlated
/// normal with given mean and covariance. The correlated variant factors
/// the covariance at construction with diagonally pivoted Cholesky,
/// truncating below tolerance 1e-10·trace, so near-singular empirical
/// covariances stay usable; draws are x = mean + F z with F the factor.
class InputSpec {
public:
    static InputSpec independent(std::vector<Marginal> marginals);
    static InputSpec correlated_normal(std::vector<double> mean, Matrix covariance);

    /// d identical U(0,1) marginals.
    static InputSpec unit_uniform(std::size_t d);
    /// d identical N(0,1) marginals.
    static InputSpec standard_normal(std::size_t d);

    std::size_t dimension() const noexcept { return dimension_; }
    bool independent_marginals() const noexcept { return correlated_ == false; }
    bool all_uniform() const;
    bool all_unit_uniform() const;

    /// Independent variant only.
    const std::vector<Marginal>& marginals() const;
    /// Correlated variant only.
    const std::vector<double>& mean() const;
    const Matrix& covariance() const;
    const Matrix& factor() const;  // d × rank
    std::size_t factor_rank() const;

    /// Structural fingerprint (kinds and parameters, bit-exact).
    std::uint64_t digest() const;

private:
    InputSpec() = default;

    std::size_t dimension_ = 0;
    bool correlated_ = false;
    std::vector<Marginal> marginals_;
    std::vector<double> mean_;
    Matrix covariance_;
    Matrix factor_;
};

/// Random-access row generator: row(i) is a pure function of (spec, seed,
/// i), so any subset of rows can be produced on any thread in any order
/// and the assembled sample never depends on the partitioning.
class Sampler {
public:
    Sampler(const InputSpec& spec, std::uint64_t seed);

    std::size_t dimension() const noexcept { return spec_->dimension(); }
    /// Required scratch length for row(); zero for independent specs.
    std::size_t scratch_size() const noexcept;
    void row(std::uint64_t index, std::span<double> out, std::span<double> scratch) const;

private:
    const InputSpec* spec_;
    std::uint64_t seed_;
};

/// Materializes n sample rows. Deterministic given (spec, n, seed).
Matrix sample(const InputSpec& spec, std::size_t n, std::uint64_t seed);

/// Tensor-product Gauss-Legendre rule over an independent all-uniform
/// spec. Nodes are enumerated lazily by index (q^d points would not fit
/// in memory at the default budget), last dimension fastest; weights are
/// probability-normalized so sum over nodes of w·g(node) estimates E[g].
class QuadratureGrid {
public:
    static constexpr std::uint64_t kDefaultNodeBudget = 20'000'000;

    static QuadratureGrid build(const InputSpec& spec, std::size_t points_per_dim,
                                std::uint64_t node_budget = kDefaultNodeBudget);

    std::size_t dimension() const noexcept { return dimension_; }
    std::size_t points_per_dim() const noexcept { return q_; }
    std::uint64_t node_count() const noexcept { return node_count_; }

    /// Writes node `index` into `point` and its weight into `weight`.
    void node(std::uint64_t index, std::span<double> point, double& weight) const;

    /// 1-D rule for dimension `dim` (already mapped into [a,b]).
    std::span<const double> nodes_1d(std::size_t dim) const;
    /// Shared probability weights of the 1-D rule (sum to 1).
    std::span<const double> weights_1d() const;

    /// Dense node list for small grids; guarded so nobody materializes a
    /// multi-gigabyte tensor grid by accident.
    Matrix materialize_points(std::uint64_t max_nodes = 1'000'000) const;
    std::vector<double> materialize_weights(std::uint64_t max_nodes = 1'000'000) const;

private:
    QuadratureGrid() = default;

    std::size_t dimension_ = 0;
    std::size_t q_ = 0;
    std::uint64_t node_count_ = 0;
    std::vector<double> nodes_;    // d × q, row per dimension
    std::vector<double> weights_;  // q, shared across dimensions
};

/// Kucherenko constant D(F) = 4·[sup_x min(F(x), 1−F(x))/f(x)]².
/// Analytic for uniform marginals; grid search over ±10 standard
/// deviations (1e5+1 points) for normal ones.
double kucherenko_constant(const Marginal& marginal);

}  // namespace dershap::inputs
