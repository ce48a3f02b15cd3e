#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "scss/random.hpp"
#include "scss/signal_models.hpp"

namespace scss {

struct KappaLevel {
  double kappa = 1.0;
  double prior = 1.0;
};

/// y = s + kappa * b + sigma * z over windows of n samples.
struct MixtureConfig {
  SourceModel source;
  SourceModel interference;
  int n = 0;
  double sigma = 0.0;
  std::vector<KappaLevel> kappa_levels;

  /// Throws on empty or non-normalized priors, non-positive or repeated
  /// kappa values, negative sigma or n < 1.
  void validate() const;

  /// E[kappa^2] under the prior.
  double mean_kappa_squared() const;
};

struct Latents {
  int tau_s = 0;
  int tau_b = 0;
  double kappa = 0.0;
};

/// One observation with its reference. Latents are for oracle scoring and
/// diagnostics only; training exports drop them.
struct MixtureRecord {
  CVector y;
  CVector s;
  Latents latents;
};

/// kappa = 10^(-sir_db / 20) for unit-power sources.
double sir_to_kappa(double sir_db);
double kappa_to_sir(double kappa);

/// Levels for the given SIR grid with a uniform prior.
std::vector<KappaLevel> uniform_kappa_levels(std::span<const double> sir_db);

/// Draws offsets, kappa, both sources and the noise independently.
MixtureRecord synthesize(const MixtureConfig& config, RandomStream& rng);

/// Same as synthesize but with kappa held at `kappa` instead of drawn.
MixtureRecord synthesize_fixed_kappa(const MixtureConfig& config, double kappa,
                                     RandomStream& rng);

/// `count` iid records; record i uses the substream derived from (seed, i).
std::vector<MixtureRecord> make_dataset(const MixtureConfig& config,
                                        std::size_t count, std::uint64_t seed);

nlohmann::json mixture_to_json(const MixtureConfig& config);
/// Accepts either "kappa_levels" ([{kappa, prior}]) or "sir_db" (uniform
/// prior). "sigma" is required.
MixtureConfig mixture_from_json(const nlohmann::json& j);
void save_mixture(const MixtureConfig& config, const std::filesystem::path& path);
MixtureConfig load_mixture(const std::filesystem::path& path);

}  // namespace scss
