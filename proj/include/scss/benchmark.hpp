#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "scss/estimators.hpp"
#include "scss/mixture.hpp"

namespace scss {

enum class Estimator { lmmse, lmmse_known_kappa, oracle, mmse };

std::string_view to_string(Estimator estimator);
std::optional<Estimator> parse_estimator(std::string_view name);
/// Comma-separated list, e.g. "lmmse,oracle".
std::vector<Estimator> parse_estimator_list(std::string_view list);

struct BenchmarkConfig {
  MixtureConfig mixture;
  int trials = 1000;
  std::vector<Estimator> estimators{Estimator::lmmse, Estimator::lmmse_known_kappa,
                                    Estimator::oracle, Estimator::mmse};
  std::uint64_t seed = 0;
  FilterBankOptions bank_options{};
  MmseOptions mmse_options{};

  void validate() const;
};

/// One (estimator, SIR) point: 10 log10 of the trial-mean of |s_hat - s|^2 / N.
struct CurveCell {
  std::string estimator;
  double sir_db = 0.0;
  double mse_db = 0.0;
  double stderr_db = 0.0;
  int trials = 0;

  bool operator==(const CurveCell&) const = default;
};

struct CurveMetadata {
  double sigma = 0.0;
  int n = 0;
  std::string source_model;
  std::string interference_model;
  std::uint64_t seed = 0;
  int trials = 0;
  std::string tool_version;
  std::vector<std::string> notices;
  /// Largest posterior mass dropped by the mmse floor on any trial.
  double max_skipped_posterior_mass = 0.0;

  bool operator==(const CurveMetadata&) const = default;
};

struct CurveTable {
  std::vector<CurveCell> cells;
  CurveMetadata metadata;

  const CurveCell* find(std::string_view estimator, double sir_db) const;
  bool operator==(const CurveTable&) const = default;
};

/// Mean and standard error of per-trial linear MSEs, reported in dB.
struct MseSummary {
  double mse_db = 0.0;
  double stderr_db = 0.0;
};
MseSummary summarize_mse(std::span<const double> per_trial_mse);

/// Sweeps every kappa level of the mixture with kappa held fixed per level.
/// An infeasible mmse bank drops mmse and adds a notice to the metadata.
CurveTable run_benchmark(const BenchmarkConfig& config);

enum class CurveFormat { csv, json };
std::optional<CurveFormat> parse_curve_format(std::string_view name);

nlohmann::json curves_to_json(const CurveTable& table);
CurveTable curves_from_json(const nlohmann::json& j);

/// CSV carries the cells only; JSON adds the metadata block.
void emit_curves(const CurveTable& table, const std::filesystem::path& path,
                 CurveFormat format);
CurveTable parse_curves(const std::filesystem::path& path, CurveFormat format);

}  // namespace scss
