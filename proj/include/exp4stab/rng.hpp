#pragma once

#include <cstdint>
#include <random>

namespace exp4stab {

using Rng = std::mt19937_64;

/// Named seed streams. Every random draw in the library is attributable to
/// (master_seed, purpose, index).
enum class StreamPurpose : std::uint64_t {
  kBetaStar = 1,
  kExperts = 2,
  kMoments = 3,
  kTrial = 4,
  kDirection = 5,
  kSelftest = 6,
};

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for stream `purpose` at position `index`: three chained splitmix64
/// rounds over master ^ purpose ^ index.
std::uint64_t derive_seed(std::uint64_t master, StreamPurpose purpose, std::uint64_t index);

Rng make_rng(std::uint64_t master, StreamPurpose purpose, std::uint64_t index);

}  // namespace exp4stab
