#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace splitstream {

using Engine = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic child seed: the same (base, index) always maps to the same value.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(base) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

/// Counter-based stream keyed by (master seed, realization id, checkpoint index).
/// Streams depend only on the key, never on execution order.
inline Engine make_stream(std::uint64_t master_seed, std::uint64_t id, std::uint64_t checkpoint) {
  return Engine(derive_seed(derive_seed(master_seed, id), checkpoint));
}

/// Reserved stream id for the per-checkpoint resampling draws.
inline constexpr std::uint64_t kResampleStreamId = std::numeric_limits<std::uint64_t>::max();

}  // namespace splitstream
