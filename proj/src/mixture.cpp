#include "scss/mixture.hpp"

#include <cassert>
#include <cmath>
#include <fstream>
#include <sstream>

#include "scss/error.hpp"
#include "scss/parallel.hpp"

namespace scss {

void MixtureConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorKind::invalid_argument, "mixture config: " + msg);
  };
  if (n < 1) fail("n must be >= 1");
  if (!std::isfinite(sigma) || sigma < 0.0) fail("sigma must be finite and >= 0");
  if (kappa_levels.empty()) fail("kappa_levels is empty");
  double total = 0.0;
  for (std::size_t i = 0; i < kappa_levels.size(); ++i) {
    const auto& level = kappa_levels[i];
    if (!std::isfinite(level.kappa) || level.kappa <= 0.0) fail("kappa must be positive");
    if (!(level.prior >= 0.0)) fail("prior must be nonnegative");
    for (std::size_t j = 0; j < i; ++j)
      if (kappa_levels[j].kappa == level.kappa) fail("kappa values must be distinct");
    total += level.prior;
  }
  if (std::abs(total - 1.0) > 1e-12) fail("priors must sum to 1");
}

double MixtureConfig::mean_kappa_squared() const {
  double acc = 0.0;
  for (const auto& level : kappa_levels) acc += level.prior * level.kappa * level.kappa;
  return acc;
}

double sir_to_kappa(double sir_db) { return std::pow(10.0, -sir_db / 20.0); }

double kappa_to_sir(double kappa) { return -20.0 * std::log10(kappa); }

std::vector<KappaLevel> uniform_kappa_levels(std::span<const double> sir_db) {
  std::vector<KappaLevel> levels;
  levels.reserve(sir_db.size());
  for (double sir : sir_db)
    levels.push_back({sir_to_kappa(sir), 1.0 / static_cast<double>(sir_db.size())});
  return levels;
}

namespace {

MixtureRecord draw(const MixtureConfig& config, const double* fixed_kappa,
                   RandomStream& rng) {
  MixtureRecord rec;
  rec.latents.tau_s = static_cast<int>(rng.uniform_index(config.source.period()));
  rec.latents.tau_b = static_cast<int>(rng.uniform_index(config.interference.period()));
  if (fixed_kappa) {
    rec.latents.kappa = *fixed_kappa;
  } else {
    const double u = rng.uniform();
    double cumulative = 0.0;
    rec.latents.kappa = config.kappa_levels.back().kappa;
    for (const auto& level : config.kappa_levels) {
      cumulative += level.prior;
      if (u < cumulative) {
        rec.latents.kappa = level.kappa;
        break;
      }
    }
  }
  rec.s = sample_source(config.source, rec.latents.tau_s, config.n, rng);
  const CVector b = sample_source(config.interference, rec.latents.tau_b, config.n, rng);
  CVector z(config.n);
  for (int i = 0; i < config.n; ++i) z(i) = rng.complex_normal();

  rec.y = rec.s + rec.latents.kappa * b + config.sigma * z;
#ifndef NDEBUG
  const CVector residual = rec.y - rec.s - rec.latents.kappa * b - config.sigma * z;
  assert(residual.cwiseAbs().maxCoeff() <=
         1e-14 * (1.0 + rec.y.cwiseAbs().maxCoeff() + b.cwiseAbs().maxCoeff() +
                  z.cwiseAbs().maxCoeff()));
#endif
  return rec;
}

}  // namespace

MixtureRecord synthesize(const MixtureConfig& config, RandomStream& rng) {
  return draw(config, nullptr, rng);
}

MixtureRecord synthesize_fixed_kappa(const MixtureConfig& config, double kappa,
                                     RandomStream& rng) {
  return draw(config, &kappa, rng);
}

std::vector<MixtureRecord> make_dataset(const MixtureConfig& config,
                                        std::size_t count, std::uint64_t seed) {
  config.validate();
  std::vector<MixtureRecord> records(count);
  parallel_for(count, [&](std::size_t i) {
    RandomStream rng = RandomStream::derive(seed, i);
    records[i] = synthesize(config, rng);
  });
  return records;
}

nlohmann::json mixture_to_json(const MixtureConfig& config) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& level : config.kappa_levels)
    levels.push_back({{"kappa", level.kappa}, {"prior", level.prior}});
  return {{"source", model_to_json(config.source)},
          {"interference", model_to_json(config.interference)},
          {"n", config.n},
          {"sigma", config.sigma},
          {"kappa_levels", levels}};
}

MixtureConfig mixture_from_json(const nlohmann::json& j) {
  try {
    if (!j.contains("sigma"))
      throw Error(ErrorKind::invalid_argument, "mixture config: sigma is required");
    std::vector<KappaLevel> levels;
    if (j.contains("kappa_levels")) {
      for (const auto& item : j.at("kappa_levels"))
        levels.push_back({item.at("kappa").get<double>(), item.at("prior").get<double>()});
    } else {
      const auto sir = j.at("sir_db").get<std::vector<double>>();
      levels = uniform_kappa_levels(sir);
    }
    MixtureConfig config{model_from_json(j.at("source")),
                         model_from_json(j.at("interference")),
                         j.at("n").get<int>(), j.at("sigma").get<double>(),
                         std::move(levels)};
    config.validate();
    return config;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, std::string("mixture config: ") + e.what());
  }
}

void save_mixture(const MixtureConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
  out << mixture_to_json(config).dump(2) << '\n';
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

MixtureConfig load_mixture(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  try {
    return mixture_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, path.string() + ": " + e.what());
  }
}

}  // namespace scss
