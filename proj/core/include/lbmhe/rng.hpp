#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "lbmhe/types.hpp"

namespace lbmhe {

/// Deterministic random stream.
///
/// Uniform and normal variates are derived from the raw 64-bit output of
/// mt19937_64 with fixed transforms (53-bit mantissa, Box-Muller), so a
/// seed yields the same sequence with every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);
  /// Standard normal.
  double normal();
  Vector normal(Index n);

  std::uint64_t seed() const { return seed_; }

  /// Derives an independent sub-seed from a master seed and a path of
  /// counters (epoch, sample, attempt, ...). Uses splitmix64 mixing.
  static std::uint64_t derive(std::uint64_t master, std::initializer_list<std::uint64_t> path);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lbmhe
