#include "dershap/oracles.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "dershap/errors.hpp"

namespace dershap::oracles {

double imp(const SymMatrix& c_abs, std::uint32_t subset) {
    long double acc = 0.0L;
    for (std::uint32_t rest = subset; rest; rest &= rest - 1) {
        const auto i = static_cast<std::size_t>(std::countr_zero(rest));
        acc += c_abs(i, i);
        // Pairs (i, j) with j another member above i; each unordered pair
        // is visited exactly once.
        for (std::uint32_t upper = rest & (rest - 1); upper; upper &= upper - 1) {
            const auto j = static_cast<std::size_t>(std::countr_zero(upper));
            acc += c_abs(i, j);
        }
    }
    return static_cast<double>(acc);
}

ExactShapley shapley_exact(const SymMatrix& c_abs) {
    const std::size_t d = c_abs.dim();
    if (d < 1) throw ConfigError("shapley_exact needs at least one input");
    if (d > 24) {
        throw BudgetError("exact Shapley enumeration over " + std::to_string(d) +
                          " inputs exceeds the 2^24 subset guard");
    }

    // weight[s] = 1 / (d · binom(d−1, s)) for a complement subset of size s.
    std::vector<long double> weight(d);
    for (std::size_t s = 0; s < d; ++s) {
        long double log_binom = std::lgamma(static_cast<long double>(d)) -
                                std::lgamma(static_cast<long double>(s + 1)) -
                                std::lgamma(static_cast<long double>(d - s));
        weight[s] = std::exp(-log_binom) / static_cast<long double>(d);
    }

    ExactShapley out;
    out.values.resize(d);
    const auto full = static_cast<std::uint32_t>((1u << d) - 1u);
    for (std::size_t i = 0; i < d; ++i) {
        const auto bit_i = static_cast<std::uint32_t>(1u << i);
        const std::uint32_t others = full & ~bit_i;
        long double acc = 0.0L;
        // Standard submask walk; the final iteration handles the empty set.
        std::uint32_t sub = others;
        while (true) {
            const auto size = static_cast<std::size_t>(std::popcount(sub));
            long double delta = static_cast<long double>(imp(c_abs, sub | bit_i)) -
                                static_cast<long double>(imp(c_abs, sub));
            out.imp_calls += 2;
            acc += weight[size] * delta;
            if (sub == 0) break;
            sub = (sub - 1) & others;
        }
        out.values[i] = static_cast<double>(acc);
    }
    return out;
}

namespace {

struct SliceStats {
    double sigma2 = 0.0;  // unbiased variance of yA over the slice
    double mean_a = 0.0;
};

SliceStats slice_stats(const std::vector<double>& ya, std::size_t lo, std::size_t hi) {
    const auto m = static_cast<double>(hi - lo);
    KahanSum sum;
    for (std::size_t r = lo; r < hi; ++r) sum.add(ya[r]);
    SliceStats st;
    st.mean_a = sum.value() / m;
    KahanSum sq;
    for (std::size_t r = lo; r < hi; ++r) {
        double dev = ya[r] - st.mean_a;
        sq.add(dev * dev);
    }
    st.sigma2 = sq.value() / (m - 1.0);
    return st;
}

double slice_total(const std::vector<double>& ya, const std::vector<double>& yab,
                   std::size_t lo, std::size_t hi, double sigma2) {
    KahanSum sum;
    for (std::size_t r = lo; r < hi; ++r) {
        double diff = ya[r] - yab[r];
        sum.add(diff * diff);
    }
    return sum.value() / (2.0 * static_cast<double>(hi - lo) * sigma2);
}

double slice_main(const std::vector<double>& yb, const std::vector<double>& yab,
                  std::size_t lo, std::size_t hi, double sigma2) {
    const auto m = static_cast<double>(hi - lo);
    KahanSum sb, sab;
    for (std::size_t r = lo; r < hi; ++r) {
        sb.add(yb[r]);
        sab.add(yab[r]);
    }
    const double mb = sb.value() / m;
    const double mab = sab.value() / m;
    KahanSum cov;
    for (std::size_t r = lo; r < hi; ++r) cov.add((yb[r] - mb) * (yab[r] - mab));
    return cov.value() / ((m - 1.0) * sigma2);
}

double batch_se(const double* batch_values, std::size_t batches) {
    const auto b = static_cast<double>(batches);
    KahanSum sum;
    for (std::size_t i = 0; i < batches; ++i) sum.add(batch_values[i]);
    const double mean = sum.value() / b;
    KahanSum sq;
    for (std::size_t i = 0; i < batches; ++i) {
        double dev = batch_values[i] - mean;
        sq.add(dev * dev);
    }
    return std::sqrt(sq.value() / (b - 1.0)) / std::sqrt(b);
}

}  // namespace

SobolEstimate sobol_estimate(const gradients::ValueModel& model,
                             const inputs::InputSpec& spec, std::uint64_t n,
                             std::uint64_t seed) {
    const std::size_t d = model.dimension();
    if (spec.dimension() != d) {
        throw ConfigError("input spec dimension does not match model dimension");
    }
    if (!spec.independent_marginals()) {
        throw ConfigError("pick-freeze Sobol estimation requires independent marginals");
    }
    if (n < 1000) {
        throw ConfigError("pick-freeze estimation needs n >= 1000 for stable batching");
    }
    const auto rows = static_cast<std::size_t>(n);
    constexpr std::size_t kBatches = 10;

    inputs::Sampler sampler(spec, seed);
    std::vector<double> scratch(sampler.scratch_size());
    Matrix a(rows, d);
    Matrix b(rows, d);
    for (std::size_t r = 0; r < rows; ++r) sampler.row(r, {a.row(r), d}, scratch);
    for (std::size_t r = 0; r < rows; ++r) sampler.row(rows + r, {b.row(r), d}, scratch);

    std::vector<double> ya(rows), yb(rows);
    model.eval_batch(a.row(0), rows, ya.data());
    model.eval_batch(b.row(0), rows, yb.data());

    SobolEstimate out;
    out.model_evaluations = n * (d + 2);
    out.total.assign(d, 0.0);
    out.main.assign(d, 0.0);
    out.se_total.assign(d, 0.0);
    out.se_main.assign(d, 0.0);

    SliceStats full = slice_stats(ya, 0, rows);
    out.sigma2 = full.sigma2;
    if (out.sigma2 <= 1e-14 * std::max(1.0, full.mean_a * full.mean_a)) {
        out.degenerate = true;
        return out;
    }

    double batch_sigma2[kBatches];
    auto batch_lo = [&](std::size_t bi) { return rows * bi / kBatches; };
    for (std::size_t bi = 0; bi < kBatches; ++bi) {
        batch_sigma2[bi] = slice_stats(ya, batch_lo(bi), batch_lo(bi + 1)).sigma2;
    }
    out.se_sigma2 = batch_se(batch_sigma2, kBatches);

    constexpr std::size_t kChunk = 16384;
    Matrix hybrid(std::min(kChunk, rows), d);
    std::vector<double> yab(rows);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t base = 0; base < rows; base += kChunk) {
            const std::size_t m = std::min(kChunk, rows - base);
            for (std::size_t r = 0; r < m; ++r) {
                double* row = hybrid.row(r);
                std::copy(a.row(base + r), a.row(base + r) + d, row);
                row[i] = b(base + r, i);
            }
            try {
                model.eval_batch(hybrid.row(0), m, yab.data() + base);
            } catch (const EvalError& e) {
                std::string where = " (pick-freeze column " + std::to_string(i) + ")";
                if (e.row() >= 0) {
                    throw EvalError(std::string(e.what()) + where,
                                    static_cast<std::int64_t>(base) + e.row());
                }
                throw EvalError(std::string(e.what()) + where);
            }
        }

        out.total[i] = slice_total(ya, yab, 0, rows, out.sigma2);
        double main_raw = slice_main(yb, yab, 0, rows, out.sigma2);
        out.main[i] = std::max(main_raw, 0.0);

        double bt[kBatches], bm[kBatches];
        for (std::size_t bi = 0; bi < kBatches; ++bi) {
            const std::size_t lo = batch_lo(bi), hi = batch_lo(bi + 1);
            // Batch estimates keep their own variance and stay unclamped:
            // the spread feeds the standard error, not the headline value.
            bt[bi] = slice_total(ya, yab, lo, hi, batch_sigma2[bi]);
            bm[bi] = slice_main(yb, yab, lo, hi, batch_sigma2[bi]);
        }
        out.se_total[i] = batch_se(bt, kBatches);
        out.se_main[i] = batch_se(bm, kBatches);
    }
    return out;
}

}  // namespace dershap::oracles
