#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "scss/mixture.hpp"

namespace scss {

inline constexpr std::string_view kDatasetMagic = "CSDS";
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 24;
inline constexpr std::size_t kLatentBytes = 16;
inline constexpr std::uint32_t kFlagLatents = 1;

/// Byte size of a dataset file with the given shape.
std::size_t dataset_file_size(std::uint32_t n, std::uint64_t count, bool latents);

/// Sidecar path: `<path>.json`.
std::filesystem::path dataset_sidecar_path(const std::filesystem::path& path);

/// Writes the CSDS file and its JSON sidecar.
///
/// Layout (little-endian): "CSDS", version u32, N u32, count u64, flags u32;
/// then per record y and s as N interleaved (re, im) f32 each, followed by
/// (tau_s u32, tau_b u32, kappa f64) when latents are included.
/// `empty_n` sets N for an empty record set.
void export_dataset(std::span<const MixtureRecord> records,
                    const std::filesystem::path& path, bool include_latents,
                    const nlohmann::json& metadata = nlohmann::json::object(),
                    std::uint32_t empty_n = 0);

struct ImportedDataset {
  std::uint32_t n = 0;
  bool has_latents = false;
  std::vector<MixtureRecord> records;
  nlohmann::json metadata;  // null when the sidecar is absent
};

ImportedDataset import_dataset(const std::filesystem::path& path);

/// Sidecar metadata for a dataset drawn from `config`.
nlohmann::json dataset_metadata(const MixtureConfig& config, std::uint64_t seed,
                                std::string_view split);

}  // namespace scss
