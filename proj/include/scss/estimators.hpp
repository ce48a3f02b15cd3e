#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scss/mixture.hpp"
#include "scss/signal_models.hpp"

namespace scss {

/// Lower Cholesky factor of a Hermitian positive-definite matrix.
struct HermitianFactor {
  CMatrix lower;
  double log_det = 0.0;
};

/// Factors `matrix`; throws ErrorKind::singular_covariance (naming `what`
/// and the smallest pivot) when it is not numerically positive definite.
HermitianFactor factor_hermitian(const CMatrix& matrix, const std::string& what);

// ------------------------------------------------------------------ LMMSE

/// W = Cs * (Cs + E[kappa^2] * Cb + sigma^2 I)^-1 on marginal covariances.
struct LmmseFilter {
  CMatrix w;
};

LmmseFilter build_lmmse(const SourceModel& source,
                        const SourceModel& interference,
                        std::span<const KappaLevel> kappa_levels, double sigma,
                        int n);

/// Same filter from precomputed marginal covariances.
LmmseFilter build_lmmse(const CMatrix& source_cov, const CMatrix& interference_cov,
                        double mean_kappa_squared, double sigma);

CVector lmmse_estimate(const LmmseFilter& filter, const CVector& y);
/// Applies the filter to every column of y.
CMatrix lmmse_estimate(const LmmseFilter& filter, const CMatrix& y);

// ------------------------------------------------------------------ oracle

struct Triple {
  int tau_s = 0;
  int tau_b = 0;
  double kappa = 0.0;
};

/// Cached factorization of Cy = Cs(tau_s) + kappa^2 Cb(tau_b) + sigma^2 I
/// plus a shared handle on Cs(tau_s). Applying it never forms Cy^-1.
struct OracleFilter {
  Triple triple;
  double log_prior = 0.0;
  HermitianFactor factor;
  std::shared_ptr<const CMatrix> source_cov;
};

OracleFilter make_oracle_filter(std::shared_ptr<const CMatrix> source_cov,
                                const CMatrix& interference_cov,
                                const Triple& triple, double sigma,
                                double log_prior = 0.0);

CVector oracle_estimate(const OracleFilter& filter, const CVector& y);
CMatrix oracle_estimate(const OracleFilter& filter, const CMatrix& y);

/// (1/N) trace(Cs - Cs Cy^-1 Cs^H).
double oracle_mse_analytic(const OracleFilter& filter);

// ------------------------------------------------------------------ bank

inline constexpr std::size_t kDefaultMemoryBudget = std::size_t{8} << 30;

struct FilterBankOptions {
  std::size_t memory_budget_bytes = kDefaultMemoryBudget;
};

/// Bytes of factor storage for a P_s x P_b x |K| grid of N x N factors.
double filter_bank_memory_bytes(int source_period, int interference_period,
                                std::size_t kappa_count, int n);

/// Every oracle filter over the latent grid, ordered tau_s-major, then
/// tau_b, then kappa. Immutable once built.
class FilterBank {
 public:
  int n() const { return n_; }
  double sigma() const { return sigma_; }
  int source_period() const { return source_period_; }
  int interference_period() const { return interference_period_; }
  const std::vector<KappaLevel>& kappa_levels() const { return kappa_levels_; }

  std::size_t size() const { return filters_.size(); }
  const OracleFilter& operator[](std::size_t i) const { return filters_[i]; }
  const std::vector<OracleFilter>& filters() const { return filters_; }

  std::optional<std::size_t> find(const Triple& triple) const;
  /// Throws ErrorKind::invalid_argument when the triple is not on the grid.
  const OracleFilter& at(const Triple& triple) const;

 private:
  friend FilterBank build_filter_bank(const SourceModel&, const SourceModel&,
                                      std::span<const KappaLevel>, double, int,
                                      const FilterBankOptions&);
  friend FilterBank read_filter_bank(const std::filesystem::path&,
                                     const SourceModel&);

  int n_ = 0;
  double sigma_ = 0.0;
  int source_period_ = 0;
  int interference_period_ = 0;
  std::vector<KappaLevel> kappa_levels_;
  std::vector<OracleFilter> filters_;
};

/// Throws ErrorKind::infeasible when the factor storage would exceed the
/// memory budget, and ErrorKind::invalid_argument when sigma <= 0.
FilterBank build_filter_bank(const SourceModel& source,
                             const SourceModel& interference,
                             std::span<const KappaLevel> kappa_levels,
                             double sigma, int n,
                             const FilterBankOptions& options = {});

CVector oracle_estimate(const FilterBank& bank, const CVector& y, int tau_s,
                        int tau_b, double kappa);
double oracle_mse_analytic(const FilterBank& bank, int tau_s, int tau_b,
                           double kappa);

/// Binary bank container: "CSFB" header as for covariances, then the grid
/// and every factor. Source covariances are rebuilt from the model on read.
void write_filter_bank(const FilterBank& bank, const std::filesystem::path& path);
FilterBank read_filter_bank(const std::filesystem::path& path,
                            const SourceModel& source);

// ------------------------------------------------------------------ posterior

/// Normalized log p(tau_s, tau_b, kappa | y), one entry per bank filter.
struct PosteriorTable {
  std::vector<double> log_posterior;
};

PosteriorTable log_posterior(const FilterBank& bank, const CVector& y);
/// Column-wise log_posterior.
std::vector<PosteriorTable> log_posterior(const FilterBank& bank, const CMatrix& y);

struct MmseOptions {
  /// Triples whose posterior falls below this are left out of the sum.
  double posterior_floor = 1e-12;
};

struct MmseStats {
  double skipped_mass = 0.0;
  std::size_t skipped_triples = 0;
};

/// Posterior-weighted sum of oracle estimates over the bank grid.
CVector mmse_estimate(const FilterBank& bank, const CVector& y,
                      const MmseOptions& options = {}, MmseStats* stats = nullptr);

/// Column-wise mmse_estimate. `stats`, when given, receives one entry per
/// column.
CMatrix mmse_estimate(const FilterBank& bank, const CMatrix& y,
                      const MmseOptions& options = {},
                      std::vector<MmseStats>* stats = nullptr);

}  // namespace scss
