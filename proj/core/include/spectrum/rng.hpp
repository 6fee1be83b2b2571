#pragma once

#include <cmath>
#include <cstdint>

namespace spectrum {

// PCG32 (XSH-RR). Deterministic across platforms, unlike <random> engines
// paired with standard distributions.
class Pcg32 {
  public:
    explicit Pcg32(uint64_t seed, uint64_t stream = 0) : state_(0), inc_((stream << 1u) | 1u) {
        next_u32();
        state_ += seed;
        next_u32();
    }

    uint32_t next_u32() {
        uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    }

    // Uniform in [0, bound). Rejection sampling keeps it unbiased.
    uint32_t next_below(uint32_t bound) {
        uint32_t threshold = (-bound) % bound;
        for (;;) {
            uint32_t r = next_u32();
            if (r >= threshold) return r % bound;
        }
    }

    // Uniform in [0, 1) with 24 bits of randomness.
    double next_double() { return (next_u32() >> 8) * (1.0 / 16777216.0); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Box-Muller; the spare value is cached so draws stay deterministic.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 1e-12) u1 = next_double();
        double u2 = next_double();
        double mag = std::sqrt(-2.0 * std::log(u1));
        double two_pi = 6.283185307179586476925287;
        spare_ = mag * std::sin(two_pi * u2);
        has_spare_ = true;
        return mag * std::cos(two_pi * u2);
    }

  private:
    uint64_t state_;
    uint64_t inc_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace spectrum
