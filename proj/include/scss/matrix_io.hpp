#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string_view>

#include "scss/signal_models.hpp"

namespace scss {

// Little-endian primitives shared by the binary containers.
namespace le {
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f32(std::ostream& out, float v);
void write_f64(std::ostream& out, double v);
std::uint32_t read_u32(const unsigned char* p);
std::uint64_t read_u64(const unsigned char* p);
float read_f32(const unsigned char* p);
double read_f64(const unsigned char* p);
}  // namespace le

inline constexpr std::string_view kCovarianceMagic = "CSCV";
inline constexpr std::uint32_t kCovarianceVersion = 1;

/// Square complex matrix container: 16-byte header (magic "CSCV", version,
/// N, reserved) then N*N row-major interleaved (re, im) f64, little-endian.
void write_covariance(const CMatrix& matrix, const std::filesystem::path& path);
CMatrix read_covariance(const std::filesystem::path& path);

}  // namespace scss
