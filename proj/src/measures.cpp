#include "dershap/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dershap/digest.hpp"
#include "dershap/errors.hpp"

namespace dershap::measures {

namespace {

/// φ_i = M_ii + ½·Σ_{j≠i} M_ij, the linear form shared by the exact and
/// truncated variants so that k = d truncation is bitwise equal to the
/// exact values.
std::vector<double> shap_linear_form(const SymMatrix& m) {
    const std::size_t d = m.dim();
    std::vector<double> out(d);
    for (std::size_t i = 0; i < d; ++i) {
        long double acc = 0.0L;
        for (std::size_t j = 0; j < d; ++j) {
            if (j != i) acc += m(i, j);
        }
        out[i] = static_cast<double>(static_cast<long double>(m(i, i)) + 0.5L * acc);
    }
    return out;
}

std::uint64_t entries_digest(const SymMatrix& m) {
    Fnv1a64 h;
    h.update(static_cast<std::uint64_t>(m.dim()));
    h.update(std::span<const double>(m.storage()));
    return h.value();
}

double combined_se(double se_lhs, double rhs, double sigma2, double se_sigma2) {
    // rhs scales as 1/σ², so its standard error is rhs·se(σ²)/σ² to first
    // order. Both sides are treated as independent.
    double se_rhs = sigma2 > 0.0 ? std::fabs(rhs) * se_sigma2 / sigma2 : 0.0;
    return std::sqrt(se_lhs * se_lhs + se_rhs * se_rhs);
}

// Absolute floor so exact-arithmetic checks (all standard errors zero)
// tolerate plain double roundoff.
constexpr double kCheckFloor = 1e-12;

}  // namespace

std::vector<double> dgsm(const SymMatrix& c) {
    std::vector<double> v(c.dim());
    for (std::size_t i = 0; i < c.dim(); ++i) v[i] = c(i, i);
    return v;
}

std::vector<double> dgsm_abs(const gradients::GradientProvider& provider,
                             const inputs::InputSpec& spec, std::uint64_t n,
                             std::uint64_t seed, unsigned workers) {
    if (n < 1) throw ConfigError("dgsm_abs needs n >= 1");
    if (workers < 1) workers = 1;
    const std::size_t d = provider.dimension();
    if (spec.dimension() != d) {
        throw ConfigError("input spec dimension does not match model dimension");
    }
    if (workers > n) workers = static_cast<unsigned>(n);

    inputs::Sampler sampler(spec, seed);
    constexpr std::size_t kChunk = 4096;
    std::vector<std::vector<KahanSum>> partial(workers, std::vector<KahanSum>(d));

    auto run = [&](unsigned b) {
        const std::uint64_t lo = n * b / workers;
        const std::uint64_t hi = n * (b + 1) / workers;
        std::vector<double> scratch(sampler.scratch_size());
        Matrix pts(kChunk, d);
        Matrix grads(kChunk, d);
        std::vector<double> values(kChunk);
        for (std::uint64_t base = lo; base < hi; base += kChunk) {
            const auto m = static_cast<std::size_t>(std::min<std::uint64_t>(kChunk, hi - base));
            for (std::size_t r = 0; r < m; ++r) {
                sampler.row(base + r, {pts.row(r), d}, scratch);
            }
            provider.gradient_batch(pts.row(0), m, values.data(), grads.row(0));
            for (std::size_t r = 0; r < m; ++r) {
                const double* g = grads.row(r);
                for (std::size_t i = 0; i < d; ++i) partial[b][i].add(std::fabs(g[i]));
            }
        }
    };
    // Worker count is tiny; sequential blocks keep this deterministic and
    // simple. The heavy path (C estimation) owns the threaded version.
    for (unsigned b = 0; b < workers; ++b) run(b);

    std::vector<double> out(d);
    for (std::size_t i = 0; i < d; ++i) {
        KahanSum total;
        for (unsigned b = 0; b < workers; ++b) total.add(partial[b][i].value());
        out[i] = total.value() / static_cast<double>(n);
    }
    return out;
}

std::vector<double> activity_scores(const spectral::EigenDecomp& eig, std::size_t m) {
    const std::size_t d = eig.dim();
    if (m < 1 || m > d) {
        throw ConfigError("activity score rank m = " + std::to_string(m) +
                          " outside [1, " + std::to_string(d) + "]");
    }
    std::vector<double> alpha(d);
    for (std::size_t i = 0; i < d; ++i) {
        long double acc = 0.0L;
        for (std::size_t j = 0; j < m; ++j) {
            long double w = eig.eigenvectors_hp[i * d + j];
            acc += eig.eigenvalues_hp[j] * w * w;
        }
        alpha[i] = static_cast<double>(acc);
    }
    return alpha;
}

ShapleyVector dershap(const SymMatrix& c) {
    ShapleyVector out;
    out.values = shap_linear_form(c.abs());
    out.source_digest = entries_digest(c);
    return out;
}

TruncatedShapley dershap_truncated(const SymMatrix& c, std::size_t k) {
    const std::size_t d = c.dim();
    if (k < 1 || k > d) {
        throw ConfigError("truncation rank k = " + std::to_string(k) + " outside [1, " +
                          std::to_string(d) + "]");
    }
    TruncatedShapley out;
    out.k = k;
    out.bound = 0.0;
    out.epsilon = 0.0;
    SymMatrix c_abs = c.abs();
    if (k == d) {
        // Nothing is dropped; skip the eigensolver entirely so the values
        // coincide bitwise with dershap(c).
        out.values = shap_linear_form(c_abs);
        return out;
    }

    // |C| of a PSD matrix need not be PSD, so order by |λ| and keep the k
    // largest; ε is the largest discarded magnitude.
    spectral::EigenDecomp eig = spectral::eigendecompose(c_abs);
    std::vector<std::size_t> order(d);
    for (std::size_t i = 0; i < d; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return std::fabs(eig.eigenvalues[x]) > std::fabs(eig.eigenvalues[y]);
    });

    long double eps = 0.0L;
    for (std::size_t r = k; r < d; ++r) {
        eps = std::max(eps, std::fabs(eig.eigenvalues_hp[order[r]]));
    }

    SymMatrix trunc(d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            long double acc = 0.0L;
            for (std::size_t r = 0; r < k; ++r) {
                std::size_t col = order[r];
                acc += eig.eigenvalues_hp[col] * eig.eigenvectors_hp[i * d + col] *
                       eig.eigenvectors_hp[j * d + col];
            }
            trunc.at(i, j) = static_cast<double>(acc);
        }
    }

    out.values = shap_linear_form(trunc);
    out.epsilon = static_cast<double>(eps);
    out.bound = static_cast<double>(d - k) * out.epsilon * std::sqrt(static_cast<double>(d));
    return out;
}

namespace {

Normalized normalize_impl(std::span<const double> raw, bool clamp_negatives) {
    Normalized out;
    out.values.assign(raw.begin(), raw.end());
    double max_mag = 0.0;
    for (double x : raw) max_mag = std::max(max_mag, std::fabs(x));
    for (double& x : out.values) {
        if (x < 0.0) {
            if (clamp_negatives) {
                out.clamped = true;
                x = 0.0;
            } else if (-x <= 1e-12 * max_mag) {
                x = 0.0;  // roundoff dust, not a sign problem
            } else {
                throw ConfigError("normalize requires nonnegative values, got " +
                                  std::to_string(x));
            }
        }
    }
    KahanSum sum;
    for (double x : out.values) sum.add(x);
    double total = sum.value();
    if (total <= 0.0) {
        out.degenerate = true;
        std::fill(out.values.begin(), out.values.end(), 0.0);
        return out;
    }
    for (double& x : out.values) x /= total;
    return out;
}

}  // namespace

Normalized normalize(std::span<const double> raw) { return normalize_impl(raw, false); }

Normalized normalize_clamped(std::span<const double> raw) { return normalize_impl(raw, true); }

std::vector<BoundCheck> check_linear_identity(std::span<const double> total,
                                              std::span<const double> se_total,
                                              std::span<const double> v, double sigma2,
                                              double se_sigma2) {
    if (!(sigma2 > 0.0)) throw ConfigError("identity check needs sigma2 > 0");
    if (total.size() != v.size() || se_total.size() != v.size()) {
        throw ConfigError("identity check inputs have mismatched lengths");
    }
    std::vector<BoundCheck> checks(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        BoundCheck& c = checks[i];
        c.index = i;
        c.lhs = total[i];
        c.rhs = v[i] / (12.0 * sigma2);
        c.combined_se = combined_se(se_total[i], c.rhs, sigma2, se_sigma2);
        double budget = 3.0 * c.combined_se + kCheckFloor;
        c.slack = budget - std::fabs(c.lhs - c.rhs);
        c.pass = c.slack >= 0.0;
    }
    return checks;
}

std::vector<BoundCheck> check_poincare_bound(std::span<const double> total,
                                             std::span<const double> se_total,
                                             std::span<const double> v, double sigma2,
                                             double se_sigma2,
                                             const inputs::InputSpec& spec) {
    if (!spec.all_unit_uniform()) {
        throw ConfigError("the Poincaré-constant bound holds for independent uniform(0,1) "
                          "marginals only");
    }
    if (!(sigma2 > 0.0)) throw ConfigError("bound check needs sigma2 > 0");
    if (total.size() != v.size() || se_total.size() != v.size() ||
        v.size() != spec.dimension()) {
        throw ConfigError("bound check inputs have mismatched lengths");
    }
    constexpr double inv_pi2 = 1.0 / (std::numbers::pi * std::numbers::pi);
    std::vector<BoundCheck> checks(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        BoundCheck& c = checks[i];
        c.index = i;
        c.lhs = total[i];
        c.rhs = inv_pi2 * v[i] / sigma2;
        c.combined_se = combined_se(se_total[i], c.rhs, sigma2, se_sigma2);
        c.slack = c.rhs + 3.0 * c.combined_se + kCheckFloor - c.lhs;
        c.pass = c.slack >= 0.0;
    }
    return checks;
}

std::vector<BoundCheck> check_spectral_bound(std::span<const double> total,
                                             std::span<const double> se_total,
                                             const spectral::EigenDecomp& eig, std::size_t m,
                                             double sigma2, double se_sigma2,
                                             const inputs::InputSpec& spec) {
    if (!spec.independent_marginals()) {
        throw ConfigError("the generalized spectral bound is only checked for independent "
                          "marginals; correlated inputs carry no such guarantee here");
    }
    if (!(sigma2 > 0.0)) throw ConfigError("bound check needs sigma2 > 0");
    const std::size_t d = eig.dim();
    if (m < 1 || m > d) {
        throw ConfigError("bound check rank m outside [1, d]");
    }
    if (total.size() != d || se_total.size() != d || spec.dimension() != d) {
        throw ConfigError("bound check inputs have mismatched lengths");
    }
    std::vector<double> alpha = activity_scores(eig, m);
    // Eigenvalues of a PSD estimate may carry roundoff-scale negatives;
    // the bound is stated for the nonnegative spectrum.
    double lambda_next = (m < d) ? std::max(eig.eigenvalues[m], 0.0) : 0.0;
    std::vector<BoundCheck> checks(d);
    for (std::size_t i = 0; i < d; ++i) {
        double dconst = inputs::kucherenko_constant(spec.marginals()[i]);
        BoundCheck& c = checks[i];
        c.index = i;
        c.lhs = total[i];
        c.rhs = dconst * (std::max(alpha[i], 0.0) + lambda_next) / sigma2;
        c.combined_se = combined_se(se_total[i], c.rhs, sigma2, se_sigma2);
        c.slack = c.rhs + 3.0 * c.combined_se + kCheckFloor - c.lhs;
        c.pass = c.slack >= 0.0;
    }
    return checks;
}

}  // namespace dershap::measures
