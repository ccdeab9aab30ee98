#pragma once

#include <cstdint>
#include <random>

namespace stego {

using Rng = std::mt19937_64;

// Derives an independent stream from a base seed and a purpose tag so that
// e.g. message sampling and transform sampling never share state.
inline Rng make_stream(std::uint64_t seed, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
    return Rng(seq);
}

namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kMessages = 2;
inline constexpr std::uint64_t kData = 3;
inline constexpr std::uint64_t kTransforms = 4;
inline constexpr std::uint64_t kProbe = 5;
inline constexpr std::uint64_t kEval = 6;
inline constexpr std::uint64_t kSplit = 7;
}  // namespace stream

// Uniform double in [0, 1) from 53 random bits; stable across standard libraries.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace stego
