#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cpdemod {

using Rng = std::mt19937_64;
using Seed = std::uint64_t;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Order-sensitive hash of a list of integers; used to derive sub-seeds.
/// The constants and the chaining are part of the reproducibility contract
/// and must not change.
constexpr Seed hash64(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (std::uint64_t p : parts) h = mix64(h ^ mix64(p));
  return h;
}

inline Rng make_rng(Seed seed) { return Rng{seed}; }

}  // namespace cpdemod
