#pragma once

#include <cmath>
#include <cstdint>

namespace cpkit::rng {

// SplitMix64 finalizer. Used as a keyed bit mixer so every drawn value is a
// pure function of (seed, stream, index, salt) and independent of generation
// order and thread count.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Fold one more key component into a running hash.
inline std::uint64_t derive(std::uint64_t h, std::uint64_t v) {
    return mix64(h ^ (v * 0xD6E8FEB86659FD93ull + 0xA0761D6478BD642Full));
}

inline std::uint64_t keyed(std::uint64_t seed, std::uint64_t stream,
                           std::uint64_t index, std::uint64_t salt) {
    return derive(derive(derive(mix64(seed), stream), index), salt);
}

// Uniform in [0,1), 53-bit resolution.
inline double to_unit(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline double uniform(std::uint64_t seed, std::uint64_t stream,
                      std::uint64_t index, double a, double b) {
    return a + (b - a) * to_unit(keyed(seed, stream, index, 0));
}

// Standard normal via Box-Muller; draws two independent uniforms from
// distinct salts. u1 is mapped into (0,1] so log() stays finite.
inline double gaussian(std::uint64_t seed, std::uint64_t stream,
                       std::uint64_t index) {
    const double u1 =
        static_cast<double>((keyed(seed, stream, index, 1) >> 11) + 1) * 0x1.0p-53;
    const double u2 = to_unit(keyed(seed, stream, index, 2));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace cpkit::rng
