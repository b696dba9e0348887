#pragma once

#include <cstdint>
#include <vector>

#include "dershap/gradients.hpp"
#include "dershap/inputs.hpp"
#include "dershap/linalg.hpp"

namespace dershap::oracles {

/// Importance of an index subset under an entrywise-absolute derivative
/// matrix: the diagonal entries of the members plus the off-diagonal
/// entries between member pairs, each pair counted once. imp of the
/// empty set is 0. The matrix must already be |C|; it is not re-checked.
double imp(const SymMatrix& c_abs, std::uint32_t subset);

/// Shapley values of imp by full subset enumeration. Deliberately
/// independent of the closed form: no shared arithmetic beyond |C|
/// itself, so agreement actually validates the formula.
struct ExactShapley {
    std::vector<double> values;
    std::uint64_t imp_calls = 0;  // exactly d·2^d, two per enumerated subset
};
ExactShapley shapley_exact(const SymMatrix& c_abs);

/// Pick-freeze Monte Carlo estimate of main and total Sobol indices.
/// Two independent n-row matrices A and B share one sample stream;
/// total uses the squared-difference form, main the covariance form.
/// Standard errors come from 10 contiguous batches, each running the
/// full estimator on its slice.
struct SobolEstimate {
    std::vector<double> total;     // S̄_i, nonnegative by construction
    std::vector<double> main;      // S̲_i, clamped at 0
    std::vector<double> se_total;
    std::vector<double> se_main;
    double sigma2 = 0.0;           // unbiased variance of f over A
    double se_sigma2 = 0.0;
    bool degenerate = false;       // σ̂² at roundoff scale; indices are zeros
    std::uint64_t model_evaluations = 0;  // n·(d+2)
};
SobolEstimate sobol_estimate(const gradients::ValueModel& model,
                             const inputs::InputSpec& spec, std::uint64_t n,
                             std::uint64_t seed);

}  // namespace dershap::oracles
