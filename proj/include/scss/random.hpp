#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace scss {

/// Seedable random stream with platform-independent output.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The std:: distributions are not (their algorithms are
/// implementation-defined), so uniforms, normals and bounded integers are
/// derived from raw engine words here.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  /// Stream for task `index` of a run seeded with `seed`. Streams for
  /// distinct (seed, index) pairs are statistically independent.
  static RandomStream derive(std::uint64_t seed, std::uint64_t index);
  static RandomStream derive(std::uint64_t seed, std::uint64_t a,
                             std::uint64_t b);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform();

  /// Uniform integer on [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal N(0, 1).
  double normal();

  /// Proper complex normal CN(0, 1): real and imaginary parts independent
  /// N(0, 1/2).
  std::complex<double> complex_normal();

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace scss
