#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace dershap {

/// Counter-based random number generator. Stream position k is a pure
/// function of (seed, k): out(k) = mix64(seed + (k+1)*gamma) with the
/// splitmix64 finalizer as mix64. Any worker can therefore generate any
/// slice of the stream without coordination, and the full sample for a
/// given seed is identical regardless of how work is partitioned.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    /// Raw 64-bit output at stream position k.
    std::uint64_t bits(std::uint64_t k) const noexcept {
        std::uint64_t z = seed_ + (k + 1) * kGamma;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1): top 53 bits scaled by 2^-53.
    double uniform01(std::uint64_t k) const noexcept {
        return static_cast<double>(bits(k) >> 11) * 0x1.0p-53;
    }

    /// Uniform on (0, 1]: never returns 0, safe under log().
    double uniform01_open0(std::uint64_t k) const noexcept {
        return static_cast<double>((bits(k) >> 11) + 1) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller on the counter pair (k, k+1).
    /// Consumes exactly two stream positions; callers reserve both.
    double normal(std::uint64_t k) const noexcept {
        double u1 = uniform01_open0(k);
        double u2 = uniform01(k + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Stream positions consumed per (row, dim) cell. Two slots keep the
    /// layout identical between uniform draws (one slot used) and normal
    /// draws (both used), so mixed-marginal specs stay reproducible.
    static constexpr std::uint64_t kSlotsPerCell = 2;

    /// Counter base for sample row `row` of a d-dimensional draw.
    static std::uint64_t row_base(std::uint64_t row, std::uint64_t dim) noexcept {
        return row * dim * kSlotsPerCell;
    }

private:
    static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
    std::uint64_t seed_;
};

}  // namespace dershap
