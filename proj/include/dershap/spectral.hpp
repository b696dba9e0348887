#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dershap/gradients.hpp"
#include "dershap/inputs.hpp"
#include "dershap/linalg.hpp"

namespace dershap::spectral {

/// Provenance carried with an estimated C matrix, enough to reproduce the
/// estimate and to refuse mismatched cache artifacts.
struct CMeta {
    std::string model_id;                // filled by the caller that knows the model
    std::string estimator;               // "monte_carlo" or "quadrature"
    std::uint64_t samples = 0;           // monte_carlo
    std::uint64_t seed = 0;              // monte_carlo
    std::uint64_t points_per_dim = 0;    // quadrature
    std::uint64_t nodes = 0;             // quadrature
    unsigned workers = 1;
    std::uint64_t spec_digest = 0;
    std::uint64_t model_evaluations = 0;
    std::uint64_t gradient_evaluations = 0;
};

/// Gradient second-moment matrix estimate, C ≈ E[∇f ∇fᵀ].
struct CMatrix {
    SymMatrix entries;
    CMeta meta;

    std::size_t dim() const noexcept { return entries.dim(); }
    /// Fingerprint of the entries (bit-exact), used as the Shapley
    /// source-matrix digest and the cache identity.
    std::uint64_t entries_digest() const;
};

/// Monte Carlo estimate (1/n)·Σ ∇f(x_j)∇f(x_j)ᵀ over samples from `spec`.
/// Work is split into `workers` contiguous row blocks, each accumulated
/// with compensated summation and merged in block order, so the result is
/// deterministic for a given (seed, workers) pair. Provider failures are
/// rethrown with the offending global sample index.
CMatrix estimate_c_mc(const gradients::GradientProvider& provider,
                      const inputs::InputSpec& spec, std::uint64_t n, std::uint64_t seed,
                      unsigned workers = 1);

/// Tensor-grid Gauss-Legendre estimate Σ w·∇f∇fᵀ (weights sum to 1).
/// Nodes stream through in index blocks; nothing of size q^d is stored.
CMatrix estimate_c_quadrature(const gradients::GradientProvider& provider,
                              const inputs::InputSpec& spec, std::size_t points_per_dim,
                              unsigned workers = 1,
                              std::uint64_t node_budget = inputs::QuadratureGrid::kDefaultNodeBudget);

/// Eigendecomposition A = W Λ Wᵀ with eigenvalues descending and
/// column-orthonormal W. Higher-precision copies of the results are kept
/// for downstream sums whose tolerances sit near double roundoff.
struct EigenDecomp {
    std::vector<double> eigenvalues;  // descending
    Matrix eigenvectors;              // column j pairs with eigenvalues[j]

    std::vector<long double> eigenvalues_hp;
    std::vector<long double> eigenvectors_hp;  // row-major d×d mirror of eigenvectors

    std::size_t dim() const noexcept { return eigenvalues.size(); }
};

/// Cyclic Jacobi in extended precision. Converged when every off-diagonal
/// magnitude falls below 1e-12·‖A‖_F (the internal target is tighter);
/// raises Error with the residual if the sweep cap is hit first.
/// Eigenvector sign convention: the largest-magnitude component of each
/// column is positive, so repeated runs serialize identically.
EigenDecomp eigendecompose(const SymMatrix& a);

/// Entrywise absolute value |C|.
SymMatrix abs_entrywise(const SymMatrix& c);

}  // namespace dershap::spectral
