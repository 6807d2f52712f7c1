#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace mcjack {

// SplitMix64 finalizer; used only to derive seeds, never as a generator.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Seed of substream `index` under `tag`, e.g. derive_seed(master, "data", r).
// Substreams are addressed, not advanced, so any schedule sees the same numbers.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                    std::uint64_t index = 0) noexcept {
  return mix64(mix64(master ^ fnv1a(tag)) + mix64(index + 0x632be59bd9b4e019ULL));
}

// Generator for replicate/row `index` of stream `seed`.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

// Fills `out` with N(0,1) deviates using std::normal_distribution (libstdc++:
// Marsaglia polar). A fresh distribution per call keeps rows independent of
// any cached spare deviate.
inline void fill_standard_normal(std::mt19937_64& gen, std::span<double> out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : out) v = normal(gen);
}

}  // namespace mcjack
