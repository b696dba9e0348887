#include "dershap/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "dershap/digest.hpp"
#include "dershap/errors.hpp"

namespace dershap::spectral {

namespace {

constexpr std::size_t kChunkRows = 4096;

/// Runs `body(block_index)` for `blocks` contiguous work blocks, inline
/// when single-threaded. Exceptions are rethrown in block order so error
/// reporting is deterministic.
template <typename Body>
void run_blocks(unsigned blocks, const Body& body) {
    if (blocks <= 1) {
        body(0);
        return;
    }
    std::vector<std::exception_ptr> errors(blocks);
    std::vector<std::thread> threads;
    threads.reserve(blocks);
    for (unsigned b = 0; b < blocks; ++b) {
        threads.emplace_back([&, b] {
            try {
                body(b);
            } catch (...) {
                errors[b] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

std::uint64_t CMatrix::entries_digest() const {
    Fnv1a64 h;
    h.update(static_cast<std::uint64_t>(entries.dim()));
    h.update(std::span<const double>(entries.storage()));
    return h.value();
}

CMatrix estimate_c_mc(const gradients::GradientProvider& provider,
                      const inputs::InputSpec& spec, std::uint64_t n, std::uint64_t seed,
                      unsigned workers) {
    if (n < 2) throw ConfigError("Monte Carlo C estimation needs n >= 2");
    if (workers < 1) workers = 1;
    const std::size_t d = provider.dimension();
    if (spec.dimension() != d) {
        throw ConfigError("input spec dimension " + std::to_string(spec.dimension()) +
                          " does not match model dimension " + std::to_string(d));
    }
    if (workers > n) workers = static_cast<unsigned>(n);

    const std::uint64_t evals_before = provider.counter().model_evaluations();
    const std::uint64_t grads_before = provider.counter().gradient_evaluations();

    inputs::Sampler sampler(spec, seed);
    std::vector<KahanSymAccumulator> partial(workers, KahanSymAccumulator(d));

    run_blocks(workers, [&](unsigned b) {
        const std::uint64_t lo = n * b / workers;
        const std::uint64_t hi = n * (b + 1) / workers;
        std::vector<double> scratch(sampler.scratch_size());
        Matrix pts(kChunkRows, d);
        Matrix grads(kChunkRows, d);
        std::vector<double> values(kChunkRows);
        KahanSymAccumulator& acc = partial[b];
        for (std::uint64_t base = lo; base < hi; base += kChunkRows) {
            const auto m = static_cast<std::size_t>(std::min<std::uint64_t>(kChunkRows,
                                                                            hi - base));
            for (std::size_t r = 0; r < m; ++r) {
                sampler.row(base + r, {pts.row(r), d}, scratch);
            }
            try {
                provider.gradient_batch(pts.row(0), m, values.data(), grads.row(0));
            } catch (const EvalError& e) {
                std::int64_t row = e.row() >= 0
                                       ? static_cast<std::int64_t>(base) + e.row()
                                       : -1;
                throw EvalError(std::string(e.what()) +
                                    (row >= 0 ? " (sample " + std::to_string(row) + ")" : ""),
                                row);
            }
            for (std::size_t r = 0; r < m; ++r) {
                acc.add_outer(grads.row(r));
            }
        }
    });

    for (unsigned b = 1; b < workers; ++b) partial[0].merge(partial[b]);

    CMatrix out;
    out.entries = partial[0].finalize(static_cast<double>(n));
    out.meta.estimator = "monte_carlo";
    out.meta.samples = n;
    out.meta.seed = seed;
    out.meta.workers = workers;
    out.meta.spec_digest = spec.digest();
    out.meta.model_evaluations = provider.counter().model_evaluations() - evals_before;
    out.meta.gradient_evaluations = provider.counter().gradient_evaluations() - grads_before;
    return out;
}

CMatrix estimate_c_quadrature(const gradients::GradientProvider& provider,
                              const inputs::InputSpec& spec, std::size_t points_per_dim,
                              unsigned workers, std::uint64_t node_budget) {
    if (workers < 1) workers = 1;
    const std::size_t d = provider.dimension();
    if (spec.dimension() != d) {
        throw ConfigError("input spec dimension " + std::to_string(spec.dimension()) +
                          " does not match model dimension " + std::to_string(d));
    }
    inputs::QuadratureGrid grid = inputs::QuadratureGrid::build(spec, points_per_dim,
                                                                node_budget);
    const std::uint64_t total = grid.node_count();
    if (workers > total) workers = static_cast<unsigned>(total);

    const std::uint64_t evals_before = provider.counter().model_evaluations();
    const std::uint64_t grads_before = provider.counter().gradient_evaluations();

    std::vector<KahanSymAccumulator> partial(workers, KahanSymAccumulator(d));

    run_blocks(workers, [&](unsigned b) {
        const std::uint64_t lo = total * b / workers;
        const std::uint64_t hi = total * (b + 1) / workers;
        Matrix pts(kChunkRows, d);
        Matrix grads(kChunkRows, d);
        std::vector<double> values(kChunkRows);
        std::vector<double> weights(kChunkRows);
        KahanSymAccumulator& acc = partial[b];
        for (std::uint64_t base = lo; base < hi; base += kChunkRows) {
            const auto m = static_cast<std::size_t>(std::min<std::uint64_t>(kChunkRows,
                                                                            hi - base));
            for (std::size_t r = 0; r < m; ++r) {
                grid.node(base + r, {pts.row(r), d}, weights[r]);
            }
            try {
                provider.gradient_batch(pts.row(0), m, values.data(), grads.row(0));
            } catch (const EvalError& e) {
                std::int64_t row = e.row() >= 0
                                       ? static_cast<std::int64_t>(base) + e.row()
                                       : -1;
                throw EvalError(std::string(e.what()) +
                                    (row >= 0 ? " (node " + std::to_string(row) + ")" : ""),
                                row);
            }
            for (std::size_t r = 0; r < m; ++r) {
                acc.add_outer_weighted(grads.row(r), weights[r]);
            }
        }
    });

    for (unsigned b = 1; b < workers; ++b) partial[0].merge(partial[b]);

    CMatrix out;
    out.entries = partial[0].finalize(1.0);  // probability weights already sum to 1
    out.meta.estimator = "quadrature";
    out.meta.points_per_dim = points_per_dim;
    out.meta.nodes = total;
    out.meta.workers = workers;
    out.meta.spec_digest = spec.digest();
    out.meta.model_evaluations = provider.counter().model_evaluations() - evals_before;
    out.meta.gradient_evaluations = provider.counter().gradient_evaluations() - grads_before;
    return out;
}

EigenDecomp eigendecompose(const SymMatrix& a) {
    const std::size_t d = a.dim();
    if (d == 0) throw ConfigError("cannot eigendecompose an empty matrix");

    // Work in extended precision: downstream identities (activity scores
    // vs DGSM at full rank) are checked at 1e-10 relative on matrix
    // entries that can sit three orders of magnitude below the dominant
    // eigenvalue, which plain double Jacobi does not reliably deliver.
    std::vector<long double> m(d * d);
    std::vector<long double> v(d * d, 0.0L);
    for (std::size_t i = 0; i < d; ++i) {
        v[i * d + i] = 1.0L;
        for (std::size_t j = 0; j < d; ++j) m[i * d + j] = a(i, j);
    }

    long double fro = 0.0L;
    for (std::size_t i = 0; i < d * d; ++i) fro += m[i] * m[i];
    fro = std::sqrt(fro);

    auto max_offdiag = [&]() {
        long double mx = 0.0L;
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t q = p + 1; q < d; ++q)
                mx = std::max(mx, std::fabs(m[p * d + q]));
        return mx;
    };

    const long double target = 1e-15L * fro;
    constexpr int kMaxSweeps = 64;
    for (int sweep = 0; sweep < kMaxSweeps && max_offdiag() > target; ++sweep) {
        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                long double apq = m[p * d + q];
                if (apq == 0.0L) continue;
                long double app = m[p * d + p];
                long double aqq = m[q * d + q];
                long double theta = (aqq - app) / (2.0L * apq);
                long double t = (theta >= 0.0L ? 1.0L : -1.0L) /
                                (std::fabs(theta) + std::sqrt(1.0L + theta * theta));
                long double c = 1.0L / std::sqrt(1.0L + t * t);
                long double s = t * c;
                long double tau = s / (1.0L + c);

                m[p * d + p] = app - t * apq;
                m[q * d + q] = aqq + t * apq;
                m[p * d + q] = 0.0L;
                m[q * d + p] = 0.0L;
                for (std::size_t i = 0; i < d; ++i) {
                    if (i == p || i == q) continue;
                    long double aip = m[i * d + p];
                    long double aiq = m[i * d + q];
                    m[i * d + p] = aip - s * (aiq + tau * aip);
                    m[p * d + i] = m[i * d + p];
                    m[i * d + q] = aiq + s * (aip - tau * aiq);
                    m[q * d + i] = m[i * d + q];
                }
                for (std::size_t i = 0; i < d; ++i) {
                    long double vip = v[i * d + p];
                    long double viq = v[i * d + q];
                    v[i * d + p] = vip - s * (viq + tau * vip);
                    v[i * d + q] = viq + s * (vip - tau * viq);
                }
            }
        }
    }

    long double residual = max_offdiag();
    if (fro > 0.0L && residual > 1e-12L * fro) {
        throw Error("eigendecomposition did not converge: residual " +
                    std::to_string(static_cast<double>(residual)) + " vs norm " +
                    std::to_string(static_cast<double>(fro)));
    }

    // Descending eigenvalue order, then the sign convention.
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return m[x * d + x] > m[y * d + y];
    });

    EigenDecomp out;
    out.eigenvalues.resize(d);
    out.eigenvalues_hp.resize(d);
    out.eigenvectors = Matrix(d, d);
    out.eigenvectors_hp.resize(d * d);
    for (std::size_t j = 0; j < d; ++j) {
        std::size_t src = order[j];
        std::size_t arg = 0;
        long double best = 0.0L;
        for (std::size_t i = 0; i < d; ++i) {
            long double mag = std::fabs(v[i * d + src]);
            if (mag > best) {
                best = mag;
                arg = i;
            }
        }
        long double flip = v[arg * d + src] < 0.0L ? -1.0L : 1.0L;
        out.eigenvalues_hp[j] = m[src * d + src];
        out.eigenvalues[j] = static_cast<double>(out.eigenvalues_hp[j]);
        for (std::size_t i = 0; i < d; ++i) {
            long double w = flip * v[i * d + src];
            out.eigenvectors_hp[i * d + j] = w;
            out.eigenvectors(i, j) = static_cast<double>(w);
        }
    }
    return out;
}

SymMatrix abs_entrywise(const SymMatrix& c) { return c.abs(); }

}  // namespace dershap::spectral
