#pragma once

#include <cmath>
#include <cstdint>

namespace irid {

// splitmix64 finalizer; used to hash ids into stream selectors.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// PCG32 (XSH-RR). State is two u64 words, so checkpoints can carry the
// exact generator position. Distinct `seq` values select independent streams.
struct Pcg32 {
    uint64_t state = 0x853c49e6748fea9bULL;
    uint64_t inc = 0xda3e39cb94b95bdbULL;

    Pcg32() = default;
    Pcg32(uint64_t seed, uint64_t seq = 0) { reseed(seed, seq); }

    void reseed(uint64_t seed, uint64_t seq = 0) {
        state = 0;
        inc = (seq << 1u) | 1u;
        next_u32();
        state += seed;
        next_u32();
    }

    uint32_t next_u32() {
        uint64_t old = state;
        state = old * 6364136223846793005ULL + inc;
        uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31));
    }

    // Unbiased bounded draw (rejection on the low range).
    uint32_t next_below(uint32_t bound) {
        uint32_t threshold = (-bound) % bound;
        for (;;) {
            uint32_t r = next_u32();
            if (r >= threshold) return r % bound;
        }
    }

    float next_float() {  // [0,1)
        return static_cast<float>(next_u32() >> 8) * 0x1p-24f;
    }

    double next_double() {  // [0,1), 53-bit
        uint64_t bits = (static_cast<uint64_t>(next_u32()) << 32) | next_u32();
        return static_cast<double>(bits >> 11) * 0x1p-53;
    }

    float uniform(float lo, float hi) { return lo + (hi - lo) * next_float(); }

    // Box-Muller, cosine branch only: consumes exactly two uniforms per call,
    // so generator state stays a pure function of draw count.
    float next_gaussian() {
        float u1 = 1.f - next_float();
        float u2 = next_float();
        return std::sqrt(-2.f * std::log(u1)) * std::cos(6.28318530717958647692f * u2);
    }

    double next_gaussian_double() {
        double u1 = 1.0 - next_double();
        double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.28318530717958647692 * u2);
    }
};

} // namespace irid
