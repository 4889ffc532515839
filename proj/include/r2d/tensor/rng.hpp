#pragma once

#include <cstdint>

namespace r2d::tensor {

/// SplitMix64 (Steele, Lea & Flood 2014).
///
/// State is a single 64-bit word advanced by the golden-ratio increment
/// 0x9E3779B97F4A7C15; each output is the state passed through the mixer
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   z =  z ^ (z >> 31)
/// Only integer arithmetic is involved, so a seed yields the same stream on
/// every platform. uniform() takes the top 53 bits and scales by 2^-53.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64();
  /// Uniform double in [0, 1).
  double uniform();
  /// Uniform integer in [0, bound); unbiased (rejection sampling).
  std::uint64_t below(std::uint64_t bound);
  /// Independent child stream seeded from this stream's next output.
  Rng split();

  std::uint64_t state() const { return state_; }
  static Rng from_state(std::uint64_t state) { return Rng(state); }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t state_;
};

}  // namespace r2d::tensor
