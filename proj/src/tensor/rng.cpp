#include "r2d/tensor/rng.hpp"

#include "r2d/errors.hpp"

namespace r2d::tensor {

std::uint64_t Rng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw ContractError("Rng::below requires a positive bound");
  // 2^64 mod bound; draws below it are redrawn so the accepted range is a
  // whole number of copies of [0, bound).
  const std::uint64_t limit = -bound % bound;
  for (;;) {
    const std::uint64_t x = next_u64();
    if (x >= limit) return x % bound;
  }
}

Rng Rng::split() {
  // Child seed is decorrelated from the parent state by a second mix.
  return Rng(next_u64() ^ 0x6A09E667F3BCC909ULL);
}

}  // namespace r2d::tensor
