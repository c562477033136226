#pragma once

#include <cstdint>

namespace specgan {

/// splitmix64 finalizer; a bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x);

/// Hash of a (seed, stream, index) triple; streams separate unrelated draws.
std::uint64_t hash_key(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

/// Counter-based generator: the n-th draw depends only on (key, n), so it is
/// reproducible on every platform without std:: distribution objects.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi].
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);
  /// Standard normal via Box-Muller.
  double normal();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace specgan
