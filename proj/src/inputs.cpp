#include "dershap/inputs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "dershap/digest.hpp"
#include "dershap/errors.hpp"
#include "dershap/rng.hpp"

namespace dershap::inputs {

namespace {

/// Diagonally pivoted Cholesky. Returns F (d × rank) with A = F·Fᵀ up to
/// the truncation tolerance; throws ConfigError when A is indefinite
/// beyond tolerance. `a` must already be symmetrized.
Matrix pivoted_cholesky(const Matrix& a) {
    const std::size_t d = a.rows();
    Matrix w = a;  // residual, lower triangle maintained
    std::vector<std::size_t> perm(d);
    for (std::size_t i = 0; i < d; ++i) perm[i] = i;

    double trace0 = 0.0;
    for (std::size_t i = 0; i < d; ++i) trace0 += a(i, i);
    if (trace0 < 0.0) {
        throw ConfigError("covariance not positive semidefinite: negative trace");
    }
    const double tol = 1e-10 * trace0;

    Matrix l(d, d, 0.0);
    std::size_t rank = d;
    for (std::size_t k = 0; k < d; ++k) {
        std::size_t piv = k;
        for (std::size_t j = k + 1; j < d; ++j) {
            if (w(j, j) > w(piv, piv)) piv = j;
        }
        if (w(piv, piv) <= tol) {
            if (w(piv, piv) < -tol) {
                throw ConfigError("covariance not positive semidefinite: pivot " +
                                  std::to_string(w(piv, piv)));
            }
            rank = k;
            break;
        }
        if (piv != k) {
            for (std::size_t j = 0; j < d; ++j) std::swap(w(k, j), w(piv, j));
            for (std::size_t i = 0; i < d; ++i) std::swap(w(i, k), w(i, piv));
            for (std::size_t c = 0; c < k; ++c) std::swap(l(k, c), l(piv, c));
            std::swap(perm[k], perm[piv]);
        }
        double lkk = std::sqrt(w(k, k));
        l(k, k) = lkk;
        for (std::size_t i = k + 1; i < d; ++i) l(i, k) = w(i, k) / lkk;
        for (std::size_t i = k + 1; i < d; ++i) {
            for (std::size_t j = k + 1; j <= i; ++j) {
                double upd = w(i, j) - l(i, k) * l(j, k);
                w(i, j) = upd;
                w(j, i) = upd;
            }
        }
    }

    // A residual with negligible diagonal but sizable off-diagonal entries
    // means the matrix was indefinite, not merely rank-deficient.
    double scale = 0.0;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) scale = std::max(scale, std::fabs(a(i, j)));
    if (rank < d) {
        for (std::size_t i = rank; i < d; ++i) {
            for (std::size_t j = rank; j < i; ++j) {
                if (std::fabs(w(i, j)) > tol + 1e-12 * scale) {
                    throw ConfigError(
                        "covariance not positive semidefinite: residual off-diagonal " +
                        std::to_string(w(i, j)));
                }
            }
        }
    }

    Matrix f(d, rank, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t c = 0; c < rank && c <= i; ++c) f(perm[i], c) = l(i, c);
    }
    return f;
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double std_normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

Marginal Marginal::uniform(double a, double b) {
    if (!(a < b)) {
        throw ConfigError("uniform marginal requires a < b, got [" + std::to_string(a) + ", " +
                          std::to_string(b) + "]");
    }
    return {Kind::Uniform, a, b};
}

Marginal Marginal::normal(double mean, double stddev) {
    if (!(stddev > 0.0)) {
        throw ConfigError("normal marginal requires stddev > 0, got " + std::to_string(stddev));
    }
    return {Kind::Normal, mean, stddev};
}

InputSpec InputSpec::independent(std::vector<Marginal> marginals) {
    if (marginals.empty()) {
        throw ConfigError("input spec needs dimension >= 1");
    }
    InputSpec s;
    s.dimension_ = marginals.size();
    s.correlated_ = false;
    s.marginals_ = std::move(marginals);
    return s;
}

InputSpec InputSpec::correlated_normal(std::vector<double> mean, Matrix covariance) {
    const std::size_t d = mean.size();
    if (d == 0) {
        throw ConfigError("input spec needs dimension >= 1");
    }
    if (covariance.rows() != d || covariance.cols() != d) {
        throw ConfigError("covariance shape does not match mean dimension " + std::to_string(d));
    }
    double scale = 0.0;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) scale = std::max(scale, std::fabs(covariance(i, j)));
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (std::fabs(covariance(i, j) - covariance(j, i)) > 1e-10 * std::max(scale, 1.0)) {
                throw ConfigError("covariance matrix is not symmetric");
            }
            double avg = 0.5 * (covariance(i, j) + covariance(j, i));
            covariance(i, j) = avg;
            covariance(j, i) = avg;
        }
    }
    InputSpec s;
    s.dimension_ = d;
    s.correlated_ = true;
    s.mean_ = std::move(mean);
    s.factor_ = pivoted_cholesky(covariance);
    s.covariance_ = std::move(covariance);
    return s;
}

InputSpec InputSpec::unit_uniform(std::size_t d) {
    std::vector<Marginal> ms(d, Marginal::uniform(0.0, 1.0));
    return independent(std::move(ms));
}

InputSpec InputSpec::standard_normal(std::size_t d) {
    std::vector<Marginal> ms(d, Marginal::normal(0.0, 1.0));
    return independent(std::move(ms));
}

bool InputSpec::all_uniform() const {
    if (correlated_) return false;
    return std::all_of(marginals_.begin(), marginals_.end(),
                       [](const Marginal& m) { return m.is_uniform(); });
}

bool InputSpec::all_unit_uniform() const {
    if (correlated_) return false;
    return std::all_of(marginals_.begin(), marginals_.end(),
                       [](const Marginal& m) { return m.is_unit_uniform(); });
}

const std::vector<Marginal>& InputSpec::marginals() const {
    if (correlated_) {
        throw ConfigError("correlated spec has no per-dimension marginals");
    }
    return marginals_;
}

const std::vector<double>& InputSpec::mean() const {
    if (!correlated_) throw ConfigError("independent spec has no joint mean");
    return mean_;
}

const Matrix& InputSpec::covariance() const {
    if (!correlated_) throw ConfigError("independent spec has no covariance");
    return covariance_;
}

const Matrix& InputSpec::factor() const {
    if (!correlated_) throw ConfigError("independent spec has no covariance factor");
    return factor_;
}

std::size_t InputSpec::factor_rank() const { return factor().cols(); }

std::uint64_t InputSpec::digest() const {
    Fnv1a64 h;
    if (!correlated_) {
        h.update(std::string_view("independent"));
        for (const Marginal& m : marginals_) {
            h.update(m.kind == Marginal::Kind::Uniform ? std::string_view("u")
                                                       : std::string_view("n"));
            h.update(m.p0);
            h.update(m.p1);
        }
    } else {
        h.update(std::string_view("correlated_normal"));
        h.update(std::span<const double>(mean_));
        h.update(std::span<const double>(covariance_.storage()));
    }
    return h.value();
}

Sampler::Sampler(const InputSpec& spec, std::uint64_t seed) : spec_(&spec), seed_(seed) {}

std::size_t Sampler::scratch_size() const noexcept {
    return spec_->independent_marginals() ? 0 : spec_->factor_rank();
}

void Sampler::row(std::uint64_t index, std::span<double> out, std::span<double> scratch) const {
    const std::size_t d = spec_->dimension();
    if (out.size() != d) {
        throw ConfigError("sample row buffer has wrong length");
    }
    CounterRng rng(seed_);
    const std::uint64_t base = CounterRng::row_base(index, d);
    if (spec_->independent_marginals()) {
        const auto& ms = spec_->marginals();
        for (std::size_t j = 0; j < d; ++j) {
            std::uint64_t cell = base + j * CounterRng::kSlotsPerCell;
            const Marginal& m = ms[j];
            if (m.kind == Marginal::Kind::Uniform) {
                out[j] = m.p0 + (m.p1 - m.p0) * rng.uniform01(cell);
            } else {
                out[j] = m.p0 + m.p1 * rng.normal(cell);
            }
        }
        return;
    }
    const std::size_t rank = spec_->factor_rank();
    if (scratch.size() < rank) {
        throw ConfigError("sample scratch buffer too small");
    }
    for (std::size_t c = 0; c < rank; ++c) {
        scratch[c] = rng.normal(base + c * CounterRng::kSlotsPerCell);
    }
    const Matrix& f = spec_->factor();
    const std::vector<double>& mu = spec_->mean();
    for (std::size_t i = 0; i < d; ++i) {
        double acc = mu[i];
        const double* fr = f.row(i);
        for (std::size_t c = 0; c < rank; ++c) acc += fr[c] * scratch[c];
        out[i] = acc;
    }
}

Matrix sample(const InputSpec& spec, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw ConfigError("sample size must be >= 1");
    Sampler s(spec, seed);
    std::vector<double> scratch(s.scratch_size());
    Matrix out(n, spec.dimension());
    for (std::size_t i = 0; i < n; ++i) {
        s.row(i, {out.row(i), spec.dimension()}, scratch);
    }
    return out;
}

QuadratureGrid QuadratureGrid::build(const InputSpec& spec, std::size_t q,
                                     std::uint64_t node_budget) {
    if (q < 1) throw ConfigError("quadrature needs at least one point per dimension");
    if (!spec.all_uniform()) {
        throw ConfigError("quadrature grids require independent uniform marginals");
    }
    const std::size_t d = spec.dimension();
    std::uint64_t count = 1;
    for (std::size_t k = 0; k < d; ++k) {
        if (count > node_budget / q) {
            throw BudgetError("quadrature grid " + std::to_string(q) + "^" + std::to_string(d) +
                              " exceeds the node budget of " + std::to_string(node_budget));
        }
        count *= q;
    }
    if (count > node_budget) {
        throw BudgetError("quadrature grid " + std::to_string(q) + "^" + std::to_string(d) +
                          " = " + std::to_string(count) + " nodes exceeds the node budget of " +
                          std::to_string(node_budget));
    }

    // Gauss-Legendre rule on [-1,1] by Newton iteration on the Legendre
    // recurrence, then affine mapping per dimension. Standard weights sum
    // to 2; dividing by 2 makes them a probability rule on each [a,b].
    std::vector<double> x01(q), w01(q);
    if (q == 1) {
        x01[0] = 0.0;
        w01[0] = 2.0;
    }
    // Evaluates P_q and P'_q at x (q >= 2 here, and x != +-1).
    auto legendre = [q](double x, double& pq, double& dp) {
        double p0 = 1.0;
        double p1 = x;
        for (std::size_t ell = 2; ell <= q; ++ell) {
            double p2 = ((2.0 * ell - 1.0) * x * p1 - (ell - 1.0) * p0) / ell;
            p0 = p1;
            p1 = p2;
        }
        pq = p1;
        dp = static_cast<double>(q) * (x * p1 - p0) / (x * x - 1.0);
    };
    for (std::size_t i = 0; q >= 2 && i < (q + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(q) + 0.5));
        double pq = 0.0, dp = 1.0;
        for (int iter = 0; iter < 100; ++iter) {
            legendre(x, pq, dp);
            double dx = pq / dp;
            x -= dx;
            if (std::fabs(dx) < 1e-15) break;
        }
        legendre(x, pq, dp);
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        x01[i] = -x;  // the cosine guess walks the positive roots; store mirrored
        w01[i] = w;
        x01[q - 1 - i] = x;
        w01[q - 1 - i] = w;
    }
    if (q >= 2 && q % 2 == 1) x01[q / 2] = 0.0;

    QuadratureGrid g;
    g.dimension_ = d;
    g.q_ = q;
    g.node_count_ = count;
    g.weights_.resize(q);
    for (std::size_t i = 0; i < q; ++i) g.weights_[i] = 0.5 * w01[i];
    g.nodes_.resize(d * q);
    const auto& ms = spec.marginals();
    for (std::size_t k = 0; k < d; ++k) {
        double a = ms[k].p0;
        double b = ms[k].p1;
        for (std::size_t i = 0; i < q; ++i) {
            g.nodes_[k * q + i] = a + (b - a) * 0.5 * (x01[i] + 1.0);
        }
    }
    return g;
}

void QuadratureGrid::node(std::uint64_t index, std::span<double> point, double& weight) const {
    if (point.size() != dimension_) {
        throw ConfigError("quadrature node buffer has wrong length");
    }
    double w = 1.0;
    std::uint64_t rest = index;
    for (std::size_t k = dimension_; k-- > 0;) {
        auto c = static_cast<std::size_t>(rest % q_);
        rest /= q_;
        point[k] = nodes_[k * q_ + c];
        w *= weights_[c];
    }
    weight = w;
}

std::span<const double> QuadratureGrid::nodes_1d(std::size_t dim) const {
    return {nodes_.data() + dim * q_, q_};
}

std::span<const double> QuadratureGrid::weights_1d() const { return {weights_}; }

Matrix QuadratureGrid::materialize_points(std::uint64_t max_nodes) const {
    if (node_count_ > max_nodes) {
        throw BudgetError("refusing to materialize " + std::to_string(node_count_) +
                          " quadrature nodes");
    }
    Matrix pts(static_cast<std::size_t>(node_count_), dimension_);
    double w;
    for (std::uint64_t i = 0; i < node_count_; ++i) {
        node(i, {pts.row(static_cast<std::size_t>(i)), dimension_}, w);
    }
    return pts;
}

std::vector<double> QuadratureGrid::materialize_weights(std::uint64_t max_nodes) const {
    if (node_count_ > max_nodes) {
        throw BudgetError("refusing to materialize " + std::to_string(node_count_) +
                          " quadrature weights");
    }
    std::vector<double> ws(static_cast<std::size_t>(node_count_));
    std::vector<double> pt(dimension_);
    for (std::uint64_t i = 0; i < node_count_; ++i) {
        node(i, pt, ws[static_cast<std::size_t>(i)]);
    }
    return ws;
}

double kucherenko_constant(const Marginal& marginal) {
    if (marginal.kind == Marginal::Kind::Uniform) {
        // sup min(F,1-F)/f is attained at the midpoint: (1/2)/(1/(b-a)).
        double width = marginal.p1 - marginal.p0;
        return width * width;
    }
    // Normal: scan min(Phi,1-Phi)/phi in standard coordinates. The scan
    // includes z = 0 exactly (odd point count), where the supremum sits.
    constexpr int kPoints = 100001;
    double best = 0.0;
    for (int i = 0; i < kPoints; ++i) {
        double z = -10.0 + 20.0 * static_cast<double>(i) / (kPoints - 1);
        double cdf = std_normal_cdf(z);
        double ratio = std::min(cdf, 1.0 - cdf) / std_normal_pdf(z);
        best = std::max(best, ratio);
    }
    double sigma = marginal.p1;
    return 4.0 * (sigma * best) * (sigma * best);
}

}  // namespace dershap::inputs
