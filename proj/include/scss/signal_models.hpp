#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "scss/random.hpp"

namespace scss {

using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

/// Root-raised-cosine pulse sampled at k/sps symbol periods for
/// k in [-span*sps/2, span*sps/2], scaled to unit energy.
///
/// The removable singularities at t = 0 and t = +-1/(4*rolloff) are filled
/// with their closed-form limits. Requires 0 < rolloff <= 1, sps >= 1 and an
/// even span_symbols >= 2.
std::vector<double> rrc_taps(double rolloff, int sps, int span_symbols);

/// Source generated by a block-diagonal matrix with one repeating PxP block
/// applied to iid CN(0,1) drivers over a buffer of buffer_length samples.
class BlockCovModel {
 public:
  BlockCovModel(CMatrix block, int buffer_length, std::uint64_t seed = 0,
                double power_scale = 1.0);

  /// Draws every block entry iid CN(0,1) from a stream seeded with `seed`.
  static BlockCovModel generate(int period, int buffer_length,
                                std::uint64_t seed);

  int period() const { return static_cast<int>(block_.rows()); }
  const CMatrix& block() const { return block_; }
  int buffer_length() const { return buffer_length_; }
  std::uint64_t seed() const { return seed_; }
  double power_scale() const { return power_scale_; }

  BlockCovModel with_power_scale(double scale) const;

  /// E[x[u] x*[v]] before power scaling.
  std::complex<double> raw_autocovariance(long u, long v) const;

 private:
  CMatrix block_;
  CMatrix gram_;  // block * block^H
  int buffer_length_;
  std::uint64_t seed_;
  double power_scale_;
};

/// Single-carrier linear modulation: sum_p a_p g[n - p*sps] with an RRC g.
class RRCModel {
 public:
  RRCModel(int sps, int span_symbols, double rolloff, double power_scale = 1.0);

  int period() const { return sps_; }
  int sps() const { return sps_; }
  int span_symbols() const { return span_symbols_; }
  double rolloff() const { return rolloff_; }
  const std::vector<double>& taps() const { return taps_; }
  double power_scale() const { return power_scale_; }

  RRCModel with_power_scale(double scale) const;

  std::complex<double> raw_autocovariance(long u, long v) const;

 private:
  int sps_;
  int span_symbols_;
  double rolloff_;
  std::vector<double> taps_;
  double power_scale_;
};

/// CP-OFDM: each period of n_subcarriers + cp_length samples carries
/// independent CN(0,1) symbols on the active subcarriers.
class OFDMModel {
 public:
  /// An empty active set selects every subcarrier except DC.
  OFDMModel(int n_subcarriers, int cp_length, std::vector<int> active = {},
            double power_scale = 1.0);

  int period() const { return n_subcarriers_ + cp_length_; }
  int n_subcarriers() const { return n_subcarriers_; }
  int cp_length() const { return cp_length_; }
  const std::vector<int>& active() const { return active_; }
  double power_scale() const { return power_scale_; }

  OFDMModel with_power_scale(double scale) const;

  /// q[n, l] for n in [0, period) and the l-th active subcarrier.
  std::complex<double> basis(int n, int active_index) const {
    return basis_(n, active_index);
  }

  std::complex<double> raw_autocovariance(long u, long v) const;

 private:
  int n_subcarriers_;
  int cp_length_;
  std::vector<int> active_;
  CMatrix basis_;       // period x |active|
  CMatrix symbol_cov_;  // period x period, (1/N_sc) * basis * basis^H
  double power_scale_;
};

/// One of the three cyclostationary Gaussian source families.
class SourceModel {
 public:
  using Variant = std::variant<BlockCovModel, RRCModel, OFDMModel>;

  SourceModel(BlockCovModel m) : model_(std::move(m)) {}
  SourceModel(RRCModel m) : model_(std::move(m)) {}
  SourceModel(OFDMModel m) : model_(std::move(m)) {}

  const Variant& variant() const { return model_; }

  int period() const;
  double power_scale() const;
  SourceModel with_power_scale(double scale) const;

  /// "block", "rrc" or "ofdm".
  std::string kind() const;
  /// Short human-readable identifier, e.g. "rrc(sps=16,span=8,rolloff=0.5)".
  std::string describe() const;

  /// Largest window that can start at absolute index `start`.
  long max_window(long start) const;

  /// E[x[u] x*[v]] including power scaling, for absolute indices u, v >= 0.
  std::complex<double> autocovariance(long u, long v) const;

 private:
  Variant model_;
};

struct ConditionalCovariance {
  int tau = 0;
  CMatrix matrix;
};

struct MarginalCovariance {
  CMatrix matrix;
};

/// N samples of a fresh realization starting at offset tau.
CVector sample_source(const SourceModel& model, int tau, int n,
                      RandomStream& rng);

/// Covariance of the window x[start], ..., x[start + n - 1] for any
/// absolute start >= 0. Exactly Hermitian.
CMatrix window_covariance(const SourceModel& model, long start, int n);

/// Analytic covariance of the window at offset tau in [0, P).
ConditionalCovariance conditional_covariance(const SourceModel& model, int tau,
                                             int n);

/// Offset-averaged covariance; Toeplitz.
MarginalCovariance marginal_covariance(const SourceModel& model, int n);

/// Mean of the marginal covariance diagonal.
double average_power(const SourceModel& model);

/// Copy of `model` with power_scale set for unit average power.
SourceModel normalize_power(const SourceModel& model);

nlohmann::json model_to_json(const SourceModel& model);
SourceModel model_from_json(const nlohmann::json& j);
void save_model(const SourceModel& model, const std::filesystem::path& path);
SourceModel load_model(const std::filesystem::path& path);

}  // namespace scss
