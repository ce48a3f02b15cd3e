#include "scss/matrix_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "scss/error.hpp"

namespace scss {

namespace le {

namespace {
template <typename U>
void put(std::ostream& out, U v) {
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U get(const unsigned char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}
}  // namespace

void write_u32(std::ostream& out, std::uint32_t v) { put(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { put(out, v); }
void write_f32(std::ostream& out, float v) { put(out, std::bit_cast<std::uint32_t>(v)); }
void write_f64(std::ostream& out, double v) { put(out, std::bit_cast<std::uint64_t>(v)); }
std::uint32_t read_u32(const unsigned char* p) { return get<std::uint32_t>(p); }
std::uint64_t read_u64(const unsigned char* p) { return get<std::uint64_t>(p); }
float read_f32(const unsigned char* p) { return std::bit_cast<float>(get<std::uint32_t>(p)); }
double read_f64(const unsigned char* p) { return std::bit_cast<double>(get<std::uint64_t>(p)); }

}  // namespace le

void write_covariance(const CMatrix& matrix, const std::filesystem::path& path) {
  if (matrix.rows() != matrix.cols())
    throw Error(ErrorKind::invalid_argument, "write_covariance: matrix is not square");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
  out.write(kCovarianceMagic.data(), 4);
  le::write_u32(out, kCovarianceVersion);
  le::write_u32(out, static_cast<std::uint32_t>(matrix.rows()));
  le::write_u32(out, 0);
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      le::write_f64(out, matrix(i, j).real());
      le::write_f64(out, matrix(i, j).imag());
    }
  }
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

CMatrix read_covariance(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCovarianceMagic.data(), 4) != 0)
    throw Error(ErrorKind::format, path.string() + ": not a covariance file");
  const auto version = le::read_u32(bytes.data() + 4);
  if (version != kCovarianceVersion)
    throw Error(ErrorKind::format, path.string() + ": unsupported covariance version " +
                                       std::to_string(version));
  const auto n = le::read_u32(bytes.data() + 8);
  const std::size_t expected = 16 + static_cast<std::size_t>(n) * n * 16;
  if (bytes.size() != expected)
    throw Error(ErrorKind::format, path.string() + ": expected " + std::to_string(expected) +
                                       " bytes, found " + std::to_string(bytes.size()));
  CMatrix m(n, n);
  const unsigned char* p = bytes.data() + 16;
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < n; ++j, p += 16) m(i, j) = {le::read_f64(p), le::read_f64(p + 8)};
  }
  return m;
}

}  // namespace scss
