#include <doctest.h>

#include <cmath>

#include "lbmhe/rng.hpp"

using lbmhe::Rng;

TEST_CASE("same seed gives the same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.uniform() == b.uniform());
    CHECK(a.normal() == b.normal());
  }
}

TEST_CASE("uniform stays in [lo, hi)") {
  Rng r(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform(-2.0, 3.0);
    CHECK(u >= -2.0);
    CHECK(u < 3.0);
  }
}

TEST_CASE("normal moments") {
  Rng r(7);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("derived seeds differ by path and are reproducible") {
  CHECK(Rng::derive(1, {0, 1}) == Rng::derive(1, {0, 1}));
  CHECK(Rng::derive(1, {0, 1}) != Rng::derive(1, {1, 0}));
  CHECK(Rng::derive(1, {0}) != Rng::derive(2, {0}));
  CHECK(Rng::derive(1, {0}) != Rng::derive(1, {0, 0}));
}
