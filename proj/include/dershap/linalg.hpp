#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace dershap {

/// Dense row-major matrix of doubles. Plain storage, no arithmetic sugar;
/// the numerics that matter live in the spectral and measure routines.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t r, std::size_t c) noexcept {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }
    double operator()(std::size_t r, std::size_t c) const noexcept {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }

    double* row(std::size_t r) noexcept { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const noexcept { return data_.data() + r * cols_; }

    std::vector<double>& storage() noexcept { return data_; }
    const std::vector<double>& storage() const noexcept { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Symmetric d-by-d matrix stored as the packed lower triangle, row by row:
/// (0,0), (1,0), (1,1), (2,0), ... Element (i,j) with i >= j lives at
/// i*(i+1)/2 + j. Only d*(d+1)/2 doubles are kept; (i,j) and (j,i) are the
/// same storage cell by construction.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(std::size_t dim, double fill = 0.0)
        : dim_(dim), data_(dim * (dim + 1) / 2, fill) {}

    std::size_t dim() const noexcept { return dim_; }

    double& at(std::size_t i, std::size_t j) noexcept {
        return data_[pack(i, j)];
    }
    double at(std::size_t i, std::size_t j) const noexcept {
        return data_[pack(i, j)];
    }
    double operator()(std::size_t i, std::size_t j) const noexcept {
        return data_[pack(i, j)];
    }

    std::vector<double>& storage() noexcept { return data_; }
    const std::vector<double>& storage() const noexcept { return data_; }

    /// Entrywise absolute value, |A|.
    SymMatrix abs() const {
        SymMatrix out = *this;
        for (double& x : out.data_) x = std::fabs(x);
        return out;
    }

    Matrix to_dense() const {
        Matrix m(dim_, dim_);
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = 0; j <= i; ++j)
                m(i, j) = m(j, i) = at(i, j);
        return m;
    }

    double trace() const noexcept {
        double t = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) t += at(i, i);
        return t;
    }

    double frobenius_norm() const noexcept {
        double s = 0.0;
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = 0; j <= i; ++j) {
                double v = at(i, j) * at(i, j);
                s += (i == j) ? v : 2.0 * v;
            }
        return std::sqrt(s);
    }

private:
    static std::size_t pack(std::size_t i, std::size_t j) noexcept {
        if (i < j) std::swap(i, j);
        return i * (i + 1) / 2 + j;
    }

    std::size_t dim_ = 0;
    std::vector<double> data_;
};

/// Kahan compensated accumulator. Used for the streaming moment sums where
/// plain summation over 1e6 terms would lose digits the acceptance
/// tolerances need.
class KahanSum {
public:
    void add(double x) noexcept {
        double y = x - comp_;
        double t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const noexcept { return sum_; }
    void reset() noexcept { sum_ = 0.0; comp_ = 0.0; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Packed-lower-triangle array of Kahan accumulators, the streaming
/// counterpart of SymMatrix.
class KahanSymAccumulator {
public:
    explicit KahanSymAccumulator(std::size_t dim)
        : dim_(dim), cells_(dim * (dim + 1) / 2) {}

    std::size_t dim() const noexcept { return dim_; }

    /// Adds g*g^T for one gradient row.
    void add_outer(const double* g) noexcept {
        std::size_t k = 0;
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = 0; j <= i; ++j)
                cells_[k++].add(g[i] * g[j]);
    }

    /// Adds w * g*g^T.
    void add_outer_weighted(const double* g, double w) noexcept {
        std::size_t k = 0;
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = 0; j <= i; ++j)
                cells_[k++].add(w * g[i] * g[j]);
    }

    /// Merges another accumulator of the same dimension (sum of sums).
    void merge(const KahanSymAccumulator& other) noexcept {
        assert(other.dim_ == dim_);
        for (std::size_t k = 0; k < cells_.size(); ++k) {
            cells_[k].add(other.cells_[k].value());
        }
    }

    /// Finalizes into a SymMatrix, dividing every cell by `denom`.
    SymMatrix finalize(double denom) const {
        SymMatrix out(dim_);
        std::size_t k = 0;
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = 0; j <= i; ++j)
                out.at(i, j) = cells_[k++].value() / denom;
        return out;
    }

private:
    std::size_t dim_;
    std::vector<KahanSum> cells_;
};

}  // namespace dershap
