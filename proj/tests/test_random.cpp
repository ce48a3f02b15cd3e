#include <doctest.h>

#include <cmath>
#include <vector>

#include "scss/random.hpp"

using scss::RandomStream;

TEST_CASE("same seed gives the same stream") {
  RandomStream a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  RandomStream c = RandomStream::derive(7, 3), d = RandomStream::derive(7, 3);
  CHECK(c.complex_normal() == d.complex_normal());
}

TEST_CASE("derived streams differ across indices") {
  RandomStream a = RandomStream::derive(7, 0), b = RandomStream::derive(7, 1);
  RandomStream c = RandomStream::derive(7, 0, 1), d = RandomStream::derive(7, 1, 0);
  CHECK(a.next_u64() != b.next_u64());
  CHECK(c.next_u64() != d.next_u64());
}

TEST_CASE("complex normal has unit power split evenly") {
  RandomStream rng(1);
  const int n = 200000;
  double re2 = 0, im2 = 0, cross = 0, mean_re = 0;
  for (int i = 0; i < n; ++i) {
    const auto z = rng.complex_normal();
    re2 += z.real() * z.real();
    im2 += z.imag() * z.imag();
    cross += z.real() * z.imag();
    mean_re += z.real();
  }
  // Each sum of squares has sd sqrt(n * 2 * 0.25); allow 5 sd.
  const double tol = 5.0 * std::sqrt(n * 0.5) / n;
  CHECK(std::abs(re2 / n - 0.5) < tol);
  CHECK(std::abs(im2 / n - 0.5) < tol);
  CHECK(std::abs(cross / n) < 5.0 * 0.5 / std::sqrt(n));
  CHECK(std::abs(mean_re / n) < 5.0 * std::sqrt(0.5 / n));
}

TEST_CASE("uniform_index stays in range and hits every value") {
  RandomStream rng(9);
  std::vector<int> hits(11, 0);
  for (int i = 0; i < 11000; ++i) {
    const auto k = rng.uniform_index(11);
    REQUIRE(k < 11);
    ++hits[k];
  }
  for (int h : hits) CHECK(h > 0);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}
