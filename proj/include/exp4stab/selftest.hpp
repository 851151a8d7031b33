#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace exp4stab {

struct SelftestResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Randomized invariant checks on the core operations (projection,
/// divergence identities, IPS, local norm, master inequality, noiseless
/// recovery). Draws from the kSelftest stream of `seed`.
std::vector<SelftestResult> run_selftest(std::uint64_t seed, int instances = 1000);

}  // namespace exp4stab
