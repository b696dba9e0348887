#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dershap {

/// FNV-1a 64-bit digest. Stable, dependency-free fingerprint for cache
/// keys and the embedded data table self-check. Not cryptographic.
class Fnv1a64 {
public:
    Fnv1a64& update(const void* data, std::size_t len) noexcept {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ULL;
        }
        return *this;
    }

    Fnv1a64& update(std::string_view s) noexcept { return update(s.data(), s.size()); }

    /// Hashes the IEEE-754 bit pattern, so bit-identical doubles digest
    /// identically and nothing is lost to decimal formatting.
    Fnv1a64& update(double x) noexcept {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof bits);
        unsigned char buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
        return update(buf, 8);
    }

    Fnv1a64& update(std::span<const double> xs) noexcept {
        for (double x : xs) update(x);
        return *this;
    }

    Fnv1a64& update(std::uint64_t v) noexcept {
        unsigned char buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
        return update(buf, 8);
    }

    std::uint64_t value() const noexcept { return state_; }

    std::string hex() const {
        static const char* digits = "0123456789abcdef";
        std::string out(16, '0');
        std::uint64_t v = state_;
        for (int i = 15; i >= 0; --i) {
            out[static_cast<std::size_t>(i)] = digits[v & 0xf];
            v >>= 4;
        }
        return out;
    }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace dershap
