#include "scss/random.hpp"

#include <cmath>

#include "scss/error.hpp"

namespace scss {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::singular_covariance: return "singular_covariance";
    case ErrorKind::infeasible: return "infeasible";
    case ErrorKind::format: return "format";
    case ErrorKind::io: return "io";
    case ErrorKind::internal: return "internal";
  }
  return "unknown";
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RandomStream::RandomStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

RandomStream RandomStream::derive(std::uint64_t seed, std::uint64_t index) {
  return RandomStream(splitmix64(seed) ^ splitmix64(index + 0x5851f42d4c957f2dULL));
}

RandomStream RandomStream::derive(std::uint64_t seed, std::uint64_t a,
                                  std::uint64_t b) {
  return derive(splitmix64(seed) ^ splitmix64(a + 0x14057b7ef767814fULL), b);
}

double RandomStream::uniform() {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t RandomStream::uniform_index(std::uint64_t n) {
  if (n == 0) throw Error(ErrorKind::invalid_argument, "uniform_index: empty range");
  const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double RandomStream::normal() {
  return std::sqrt(2.0) * complex_normal().real();
}

std::complex<double> RandomStream::complex_normal() {
  // Marsaglia polar method, scaled so E|z|^2 = 1.
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0);
  const double f = std::sqrt(-std::log(s) / s);
  return {u * f, v * f};
}

}  // namespace scss
