#include "scss/profiles.hpp"

namespace scss {

std::optional<Profile> parse_profile(std::string_view name) {
  if (name == "s51") return Profile::s51;
  if (name == "s52") return Profile::s52;
  if (name == "s52-reduced") return Profile::s52_reduced;
  return std::nullopt;
}

std::string_view to_string(Profile profile) {
  switch (profile) {
    case Profile::s51: return "s51";
    case Profile::s52: return "s52";
    case Profile::s52_reduced: return "s52-reduced";
  }
  return "unknown";
}

std::vector<double> profile_sir_db(Profile profile) {
  std::vector<double> sir;
  if (profile == Profile::s51) {
    for (int i = 0; i < 5; ++i) sir.push_back(-6.0 + 3.0 * i);
  } else {
    for (int i = 0; i < 23; ++i) sir.push_back(-30.0 + 1.5 * i);
  }
  return sir;
}

MixtureConfig profile_mixture(Profile profile, double sigma) {
  const auto sir = profile_sir_db(profile);
  if (profile == Profile::s51) {
    MixtureConfig config{
        normalize_power(BlockCovModel::generate(11, 550, kS51SourceBlockSeed)),
        normalize_power(BlockCovModel::generate(5, 550, kS51InterferenceBlockSeed)),
        256, sigma, uniform_kappa_levels(sir)};
    config.validate();
    return config;
  }
  MixtureConfig config{normalize_power(RRCModel(16, 8, 0.5)),
                       normalize_power(OFDMModel(64, 16)),
                       profile == Profile::s52 ? 1280 : 320, sigma,
                       uniform_kappa_levels(sir)};
  config.validate();
  return config;
}

}  // namespace scss
