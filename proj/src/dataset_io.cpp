#include "scss/dataset_io.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "scss/error.hpp"
#include "scss/matrix_io.hpp"
#include "scss/profiles.hpp"

namespace scss {

std::size_t dataset_file_size(std::uint32_t n, std::uint64_t count, bool latents) {
  const std::size_t record = 2 * std::size_t{n} * 2 * sizeof(float) + (latents ? kLatentBytes : 0);
  return kDatasetHeaderBytes + count * record;
}

std::filesystem::path dataset_sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

void export_dataset(std::span<const MixtureRecord> records,
                    const std::filesystem::path& path, bool include_latents,
                    const nlohmann::json& metadata, std::uint32_t empty_n) {
  const std::uint32_t n =
      records.empty() ? empty_n : static_cast<std::uint32_t>(records.front().y.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].y.size() != n || records[i].s.size() != n)
      throw Error(ErrorKind::invalid_argument,
                  "export_dataset: record " + std::to_string(i) + " has length " +
                      std::to_string(records[i].y.size()) + ", expected " + std::to_string(n));
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
  out.write(kDatasetMagic.data(), 4);
  le::write_u32(out, kDatasetVersion);
  le::write_u32(out, n);
  le::write_u64(out, records.size());
  le::write_u32(out, include_latents ? kFlagLatents : 0);
  for (const auto& rec : records) {
    for (const CVector* v : {&rec.y, &rec.s}) {
      for (std::uint32_t k = 0; k < n; ++k) {
        le::write_f32(out, static_cast<float>((*v)(k).real()));
        le::write_f32(out, static_cast<float>((*v)(k).imag()));
      }
    }
    if (include_latents) {
      le::write_u32(out, static_cast<std::uint32_t>(rec.latents.tau_s));
      le::write_u32(out, static_cast<std::uint32_t>(rec.latents.tau_b));
      le::write_f64(out, rec.latents.kappa);
    }
  }
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
  out.close();

  nlohmann::json sidecar = metadata;
  sidecar["format"] = "CSDS";
  sidecar["version"] = kDatasetVersion;
  sidecar["n"] = n;
  sidecar["count"] = records.size();
  sidecar["latents"] = include_latents;
  std::ofstream side(dataset_sidecar_path(path), std::ios::binary);
  if (!side) throw Error(ErrorKind::io, "cannot write sidecar for " + path.string());
  side << sidecar.dump(2) << '\n';
}

ImportedDataset import_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kDatasetMagic.data(), 4) != 0)
    throw Error(ErrorKind::format, path.string() + ": not a dataset file");
  if (bytes.size() < kDatasetHeaderBytes)
    throw Error(ErrorKind::format, path.string() + ": corrupt header (" +
                                       std::to_string(bytes.size()) + " bytes)");
  const auto version = le::read_u32(bytes.data() + 4);
  if (version != kDatasetVersion)
    throw Error(ErrorKind::format, path.string() + ": unsupported dataset version " +
                                       std::to_string(version));
  ImportedDataset ds;
  ds.n = le::read_u32(bytes.data() + 8);
  const auto count = le::read_u64(bytes.data() + 12);
  const auto flags = le::read_u32(bytes.data() + 20);
  if ((flags & ~kFlagLatents) != 0)
    throw Error(ErrorKind::format, path.string() + ": unknown flag bits");
  ds.has_latents = (flags & kFlagLatents) != 0;

  const std::size_t expected = dataset_file_size(ds.n, count, ds.has_latents);
  if (bytes.size() < expected)
    throw Error(ErrorKind::format,
                path.string() + ": truncated payload, expected " + std::to_string(expected) +
                    " bytes, found " + std::to_string(bytes.size()) + " (missing " +
                    std::to_string(expected - bytes.size()) + " bytes)");
  if (bytes.size() > expected)
    throw Error(ErrorKind::format, path.string() + ": " +
                                       std::to_string(bytes.size() - expected) +
                                       " trailing bytes after payload");

  const unsigned char* p = bytes.data() + kDatasetHeaderBytes;
  ds.records.resize(count);
  for (auto& rec : ds.records) {
    for (CVector* v : {&rec.y, &rec.s}) {
      v->resize(ds.n);
      for (std::uint32_t k = 0; k < ds.n; ++k, p += 8)
        (*v)(k) = {le::read_f32(p), le::read_f32(p + 4)};
    }
    if (ds.has_latents) {
      rec.latents = {static_cast<int>(le::read_u32(p)), static_cast<int>(le::read_u32(p + 4)),
                     le::read_f64(p + 8)};
      p += kLatentBytes;
    }
  }

  std::ifstream side(dataset_sidecar_path(path), std::ios::binary);
  if (side) {
    try {
      ds.metadata = nlohmann::json::parse(side);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::format, "sidecar for " + path.string() + ": " + e.what());
    }
  }
  return ds;
}

nlohmann::json dataset_metadata(const MixtureConfig& config, std::uint64_t seed,
                                std::string_view split) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& level : config.kappa_levels)
    levels.push_back({{"kappa", level.kappa}, {"prior", level.prior},
                      {"sir_db", kappa_to_sir(level.kappa)}});
  return {{"source", model_to_json(config.source)},
          {"interference", model_to_json(config.interference)},
          {"sigma", config.sigma},
          {"kappa_levels", levels},
          {"seed", seed},
          {"split", split},
          {"tool_version", kToolVersion}};
}

}  // namespace scss
