#pragma once

#include <cstdint>
#include <random>

namespace orcd {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; decorrelates (seed, stream, counter) triples.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t counter = 0) noexcept {
  return mix64(mix64(mix64(seed) ^ stream) ^ counter);
}

// Named streams so that, e.g., changing the optimizer never perturbs the data.
namespace streams {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t data = 2;
inline constexpr std::uint64_t select = 3;
inline constexpr std::uint64_t noise = 4;
inline constexpr std::uint64_t problem = 5;
}  // namespace streams

}  // namespace orcd
