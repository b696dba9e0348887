#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dershap/gradients.hpp"
#include "dershap/inputs.hpp"
#include "dershap/linalg.hpp"
#include "dershap/spectral.hpp"

namespace dershap::measures {

/// DGSM vector: v_i = C_ii = E[(∂f/∂x_i)²].
std::vector<double> dgsm(const SymMatrix& c);
inline std::vector<double> dgsm(const spectral::CMatrix& c) { return dgsm(c.entries); }

/// Mean absolute partial derivatives μ*_i = (1/n)·Σ|∂f_i(x_j)|, Monte
/// Carlo only. Shares the sampling scheme (and therefore samples, for a
/// given seed) with estimate_c_mc.
std::vector<double> dgsm_abs(const gradients::GradientProvider& provider,
                             const inputs::InputSpec& spec, std::uint64_t n,
                             std::uint64_t seed, unsigned workers = 1);

/// Activity scores α_i(m) = Σ_{j≤m} λ_j·w_ij² from the top-m eigenpairs
/// of C (the matrix itself, not |C|). Accumulated in extended precision:
/// at m = d this must reproduce the diagonal of C to 1e-10 relative.
std::vector<double> activity_scores(const spectral::EigenDecomp& eig, std::size_t m);

/// Shapley values of the derivative-based subset importance, closed form
/// φ_i = C_ii + ½·Σ_{j≠i}|C_ij|.
struct ShapleyVector {
    std::vector<double> values;
    std::uint64_t source_digest = 0;  // fingerprint of the C entries
};
ShapleyVector dershap(const SymMatrix& c);
inline ShapleyVector dershap(const spectral::CMatrix& c) { return dershap(c.entries); }

/// Eigen-truncated approximation: |C| is eigendecomposed, the d−k
/// smallest-|λ| directions are dropped, and Φ̃ is the same linear form on
/// the reconstruction. ε = max dropped |λ|; ‖Φ−Φ̃‖₂ ≤ (d−k)·ε·√d.
/// k = d reproduces Φ bitwise with bound 0.
struct TruncatedShapley {
    std::vector<double> values;
    double bound = 0.0;
    double epsilon = 0.0;
    std::size_t k = 0;
};
TruncatedShapley dershap_truncated(const SymMatrix& c, std::size_t k);
inline TruncatedShapley dershap_truncated(const spectral::CMatrix& c, std::size_t k) {
    return dershap_truncated(c.entries, k);
}

/// raw/Σraw. All-zero input is flagged degenerate and maps to all zeros.
/// Rejects genuinely negative entries; roundoff-scale negatives (within
/// 1e-12 of zero relative to the largest entry) are treated as zero.
struct Normalized {
    std::vector<double> values;
    bool degenerate = false;
    bool clamped = false;
};
Normalized normalize(std::span<const double> raw);

/// Same, but clamps negative entries to zero and flags the clamp; meant
/// for truncated DerSHAP values, which may dip slightly negative.
Normalized normalize_clamped(std::span<const double> raw);

/// One bound or identity comparison. `slack` is how far the check is
/// from failing (negative means failed); `combined_se` propagates the
/// statistical error of both sides (delta method on the σ² division).
struct BoundCheck {
    std::size_t index = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    double combined_se = 0.0;
    double slack = 0.0;
    bool pass = false;
};

/// Componentwise-linear identity: S̄_i = (1/12)·v_i/σ², holding within
/// 3 combined standard errors. Pass se_sigma2 = 0 when σ² is exact.
std::vector<BoundCheck> check_linear_identity(std::span<const double> total,
                                              std::span<const double> se_total,
                                              std::span<const double> v, double sigma2,
                                              double se_sigma2);

/// Poincaré bound S̄_i ≤ (1/π²)·v_i/σ². Valid for independent U(0,1)
/// marginals only; anything else is refused.
std::vector<BoundCheck> check_poincare_bound(std::span<const double> total,
                                             std::span<const double> se_total,
                                             std::span<const double> v, double sigma2,
                                             double se_sigma2,
                                             const inputs::InputSpec& spec);

/// Generalized spectral bound S̄_i ≤ D(F_i)·(α_i(m)+λ_{m+1})/σ² with D
/// the Kucherenko constant and λ_{d+1} := 0. Requires independent
/// marginals; correlated specs are refused rather than guessed at.
std::vector<BoundCheck> check_spectral_bound(std::span<const double> total,
                                             std::span<const double> se_total,
                                             const spectral::EigenDecomp& eig, std::size_t m,
                                             double sigma2, double se_sigma2,
                                             const inputs::InputSpec& spec);

}  // namespace dershap::measures
