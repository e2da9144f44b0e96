#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace qpo {

// Deterministic random source used everywhere in the library.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. The standard distributions are not portable across library
// implementations, so conversions to uniform and normal variates are done
// here explicitly:
//   uniform01  = (engine() >> 11) * 2^-53            in [0, 1)
//   normal     = Box-Muller on (1 - u1, u2), both variates of a pair used
// With these rules a seed reproduces the same stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finalizer; good avalanche for deriving independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed of stream `stream` under `master`, e.g. derive_seed(run_seed, 2).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// 64-bit FNV-1a, used to turn sweep cell names into stream ids.
std::uint64_t fnv1a(std::string_view text);

}  // namespace qpo
