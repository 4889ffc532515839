#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "r2d/data/example.hpp"

namespace r2d::data {

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct Splits {
  std::vector<Example> train;
  std::vector<Example> val;
  std::vector<Example> test;
};

/// Per-label proportional allocation with largest-remainder rounding.
///
/// Part sizes are the largest-remainder apportionment of the whole input;
/// within that, each label gets the floor or ceiling of its quota in every
/// part (larger fractional parts first), so labels deviate from their target
/// share by less than one example and the part sizes are exact.
///
/// Each label's examples are shuffled with a seeded Rng and dealt into the
/// parts; every part then lists its examples in input order. Fractions must
/// be non-negative and sum to 1 within 1e-9 (ConfigError otherwise). A label
/// with fewer examples than non-empty parts logs a warning.
Splits stratified_split(std::span<const Example> examples, const SplitFractions& fractions,
                        std::uint64_t seed);

/// Largest-remainder apportionment of `total` over `weights` (summing to 1).
/// Ties on the fractional part go to the lower index.
std::vector<std::size_t> largest_remainder(std::size_t total, std::span<const double> weights);

}  // namespace r2d::data
