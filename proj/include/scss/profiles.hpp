#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "scss/mixture.hpp"

namespace scss {

inline constexpr std::string_view kToolVersion = "scss 1.0.0";

/// Built-in experiment setups.
///  s51         two block-covariance sources (P=11 and P=5), N=256, SIR
///              -6..6 dB in 5 steps.
///  s52         RRC (16 sps, span 8, rolloff 0.5) against CP-OFDM (64 + 16),
///              N=1280, SIR -30..3 dB in 1.5 dB steps.
///  s52-reduced as s52 with N=320.
enum class Profile { s51, s52, s52_reduced };

std::optional<Profile> parse_profile(std::string_view name);
std::string_view to_string(Profile profile);

/// SIR grid of a profile, in dB.
std::vector<double> profile_sir_db(Profile profile);

/// Unit-power source pair and kappa grid for `profile` at noise level sigma.
MixtureConfig profile_mixture(Profile profile, double sigma);

/// Seeds used to draw the frozen generator blocks of the s51 profile.
inline constexpr std::uint64_t kS51SourceBlockSeed = 51011;
inline constexpr std::uint64_t kS51InterferenceBlockSeed = 51005;

}  // namespace scss
