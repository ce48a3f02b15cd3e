#include "scss/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "scss/error.hpp"
#include "scss/matrix_io.hpp"
#include "scss/parallel.hpp"

namespace scss {

namespace {

void require_length(Eigen::Index got, int want, const char* what) {
  if (got != want) {
    std::ostringstream msg;
    msg << what << ": expected length " << want << ", got " << got;
    throw Error(ErrorKind::invalid_argument, msg.str());
  }
}

// Log-sum-exp normalization with the max shift.
void normalize_log(std::vector<double>& values) {
  const double peak = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - peak);
  const double shift = peak + std::log(sum);
  for (double& v : values) v -= shift;
}

CVector solve_forward(const HermitianFactor& f, const CVector& y) {
  return f.lower.triangularView<Eigen::Lower>().solve(y);
}

CMatrix solve_forward(const HermitianFactor& f, const CMatrix& y) {
  return f.lower.triangularView<Eigen::Lower>().solve(y);
}

template <typename M>
M solve_backward(const HermitianFactor& f, const M& w) {
  return f.lower.adjoint().triangularView<Eigen::Upper>().solve(w);
}

std::string describe(const Triple& t) {
  std::ostringstream out;
  out.precision(17);
  out << "(tau_s=" << t.tau_s << ", tau_b=" << t.tau_b << ", kappa=" << t.kappa << ")";
  return out.str();
}

}  // namespace

HermitianFactor factor_hermitian(const CMatrix& matrix, const std::string& what) {
  const double scale = std::max(matrix.diagonal().real().cwiseAbs().maxCoeff(),
                                std::numeric_limits<double>::min());
  // Pivots at roundoff level of the largest diagonal entry count as zero.
  const double threshold = 64.0 * std::numeric_limits<double>::epsilon() * scale;

  Eigen::LLT<CMatrix> llt(matrix);
  bool ok = llt.info() == Eigen::Success;
  double smallest = 0.0;
  if (ok) {
    const Eigen::VectorXd pivots = llt.matrixLLT().diagonal().real().cwiseAbs2();
    smallest = pivots.minCoeff();
    ok = smallest > threshold;
  } else {
    smallest = Eigen::LDLT<CMatrix>(matrix).vectorD().real().minCoeff();
  }
  if (!ok) {
    std::ostringstream msg;
    msg.precision(6);
    msg << "singular covariance: " << what << " is not positive definite (smallest pivot "
        << smallest << ", threshold " << threshold << ")";
    throw Error(ErrorKind::singular_covariance, msg.str());
  }

  HermitianFactor out;
  out.lower = llt.matrixL();
  out.log_det = 2.0 * out.lower.diagonal().real().array().log().sum();
  return out;
}

// ------------------------------------------------------------------ LMMSE

LmmseFilter build_lmmse(const CMatrix& source_cov, const CMatrix& interference_cov,
                        double mean_kappa_squared, double sigma) {
  if (!(sigma >= 0.0) || !(mean_kappa_squared >= 0.0))
    throw Error(ErrorKind::invalid_argument, "build_lmmse: sigma and E[kappa^2] must be >= 0");
  CMatrix cy = source_cov + mean_kappa_squared * interference_cov;
  cy.diagonal().array() += sigma * sigma;
  const HermitianFactor f = factor_hermitian(cy, "LMMSE observation covariance");
  // Cs and Cy are Hermitian, so W^H = Cy^-1 Cs.
  const CMatrix wh = solve_backward(f, solve_forward(f, source_cov));
  return LmmseFilter{wh.adjoint()};
}

LmmseFilter build_lmmse(const SourceModel& source,
                        const SourceModel& interference,
                        std::span<const KappaLevel> kappa_levels, double sigma,
                        int n) {
  double mean_k2 = 0.0;
  for (const auto& level : kappa_levels) mean_k2 += level.prior * level.kappa * level.kappa;
  return build_lmmse(marginal_covariance(source, n).matrix,
                     marginal_covariance(interference, n).matrix, mean_k2, sigma);
}

CVector lmmse_estimate(const LmmseFilter& filter, const CVector& y) {
  require_length(y.size(), static_cast<int>(filter.w.cols()), "lmmse_estimate");
  return filter.w * y;
}

CMatrix lmmse_estimate(const LmmseFilter& filter, const CMatrix& y) {
  require_length(y.rows(), static_cast<int>(filter.w.cols()), "lmmse_estimate");
  return filter.w * y;
}

// ------------------------------------------------------------------ oracle

OracleFilter make_oracle_filter(std::shared_ptr<const CMatrix> source_cov,
                                const CMatrix& interference_cov,
                                const Triple& triple, double sigma,
                                double log_prior) {
  CMatrix cy = *source_cov + triple.kappa * triple.kappa * interference_cov;
  cy.diagonal().array() += sigma * sigma;
  OracleFilter f;
  f.triple = triple;
  f.log_prior = log_prior;
  f.factor = factor_hermitian(cy, "observation covariance at " + describe(triple));
  f.source_cov = std::move(source_cov);
  return f;
}

CVector oracle_estimate(const OracleFilter& filter, const CVector& y) {
  require_length(y.size(), static_cast<int>(filter.factor.lower.rows()), "oracle_estimate");
  return *filter.source_cov * solve_backward(filter.factor, solve_forward(filter.factor, y));
}

CMatrix oracle_estimate(const OracleFilter& filter, const CMatrix& y) {
  require_length(y.rows(), static_cast<int>(filter.factor.lower.rows()), "oracle_estimate");
  if (y.cols() <= y.rows())
    return *filter.source_cov * solve_backward(filter.factor, solve_forward(filter.factor, y));
  // Wide batches: Cs L^-H = (L^-1 Cs)^H costs one N x N solve and saves a
  // triangular solve per column.
  const CMatrix g = solve_forward(filter.factor, *filter.source_cov);
  return g.adjoint() * solve_forward(filter.factor, y);
}

double oracle_mse_analytic(const OracleFilter& filter) {
  const CMatrix& cs = *filter.source_cov;
  const double explained = solve_forward(filter.factor, cs).squaredNorm();
  const double mse = (cs.trace().real() - explained) / static_cast<double>(cs.rows());
  return std::max(0.0, mse);
}

// ------------------------------------------------------------------ bank

double filter_bank_memory_bytes(int source_period, int interference_period,
                                std::size_t kappa_count, int n) {
  return static_cast<double>(source_period) * interference_period *
         static_cast<double>(kappa_count) * n * static_cast<double>(n) *
         sizeof(std::complex<double>);
}

std::optional<std::size_t> FilterBank::find(const Triple& triple) const {
  if (triple.tau_s < 0 || triple.tau_s >= source_period_ || triple.tau_b < 0 ||
      triple.tau_b >= interference_period_)
    return std::nullopt;
  for (std::size_t k = 0; k < kappa_levels_.size(); ++k) {
    const double kappa = kappa_levels_[k].kappa;
    if (std::abs(kappa - triple.kappa) <= 1e-12 * kappa) {
      return (static_cast<std::size_t>(triple.tau_s) * interference_period_ +
              static_cast<std::size_t>(triple.tau_b)) *
                 kappa_levels_.size() +
             k;
    }
  }
  return std::nullopt;
}

const OracleFilter& FilterBank::at(const Triple& triple) const {
  const auto index = find(triple);
  if (!index)
    throw Error(ErrorKind::invalid_argument, "triple " + describe(triple) + " is not on the bank grid");
  return filters_[*index];
}

FilterBank build_filter_bank(const SourceModel& source,
                             const SourceModel& interference,
                             std::span<const KappaLevel> kappa_levels,
                             double sigma, int n,
                             const FilterBankOptions& options) {
  if (!(sigma > 0.0))
    throw Error(ErrorKind::invalid_argument, "build_filter_bank: sigma must be > 0");
  if (kappa_levels.empty())
    throw Error(ErrorKind::invalid_argument, "build_filter_bank: no kappa levels");
  const int ps = source.period();
  const int pb = interference.period();
  const double required = filter_bank_memory_bytes(ps, pb, kappa_levels.size(), n);
  if (required > static_cast<double>(options.memory_budget_bytes)) {
    std::ostringstream msg;
    msg.precision(4);
    msg << "filter bank infeasible: " << ps << "x" << pb << "x" << kappa_levels.size()
        << " = " << static_cast<std::size_t>(ps) * static_cast<std::size_t>(pb) * kappa_levels.size()
        << " triples at N=" << n << " need " << required / (1u << 30)
        << " GiB of factor storage, budget is "
        << static_cast<double>(options.memory_budget_bytes) / (1u << 30) << " GiB";
    throw Error(ErrorKind::infeasible, msg.str());
  }

  std::vector<std::shared_ptr<const CMatrix>> cs(static_cast<std::size_t>(ps));
  std::vector<CMatrix> cb(static_cast<std::size_t>(pb));
  parallel_for(cs.size() + cb.size(), [&](std::size_t i) {
    if (i < cs.size())
      cs[i] = std::make_shared<const CMatrix>(
          conditional_covariance(source, static_cast<int>(i), n).matrix);
    else
      cb[i - cs.size()] =
          conditional_covariance(interference, static_cast<int>(i - cs.size()), n).matrix;
  });

  FilterBank bank;
  bank.n_ = n;
  bank.sigma_ = sigma;
  bank.source_period_ = ps;
  bank.interference_period_ = pb;
  bank.kappa_levels_.assign(kappa_levels.begin(), kappa_levels.end());
  const std::size_t nk = kappa_levels.size();
  bank.filters_.resize(static_cast<std::size_t>(ps) * pb * nk);
  parallel_for(bank.filters_.size(), [&](std::size_t i) {
    const auto k = i % nk;
    const auto tb = (i / nk) % static_cast<std::size_t>(pb);
    const auto ts = i / (nk * static_cast<std::size_t>(pb));
    const auto& level = kappa_levels[k];
    const double log_prior = std::log(level.prior) - std::log(static_cast<double>(ps)) -
                             std::log(static_cast<double>(pb));
    bank.filters_[i] = make_oracle_filter(
        cs[ts], cb[tb], {static_cast<int>(ts), static_cast<int>(tb), level.kappa}, sigma,
        log_prior);
  });
  return bank;
}

CVector oracle_estimate(const FilterBank& bank, const CVector& y, int tau_s,
                        int tau_b, double kappa) {
  return oracle_estimate(bank.at({tau_s, tau_b, kappa}), y);
}

double oracle_mse_analytic(const FilterBank& bank, int tau_s, int tau_b,
                           double kappa) {
  return oracle_mse_analytic(bank.at({tau_s, tau_b, kappa}));
}

// ------------------------------------------------------------------ bank io

namespace {
inline constexpr char kBankMagic[4] = {'C', 'S', 'F', 'B'};
inline constexpr std::uint32_t kBankVersion = 1;
}  // namespace

void write_filter_bank(const FilterBank& bank, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
  out.write(kBankMagic, 4);
  le::write_u32(out, kBankVersion);
  le::write_u32(out, static_cast<std::uint32_t>(bank.n()));
  le::write_u32(out, 0);
  le::write_u32(out, static_cast<std::uint32_t>(bank.source_period()));
  le::write_u32(out, static_cast<std::uint32_t>(bank.interference_period()));
  le::write_u32(out, static_cast<std::uint32_t>(bank.kappa_levels().size()));
  le::write_u32(out, 0);
  le::write_f64(out, bank.sigma());
  for (const auto& level : bank.kappa_levels()) {
    le::write_f64(out, level.kappa);
    le::write_f64(out, level.prior);
  }
  for (const auto& f : bank.filters()) {
    le::write_u32(out, static_cast<std::uint32_t>(f.triple.tau_s));
    le::write_u32(out, static_cast<std::uint32_t>(f.triple.tau_b));
    le::write_f64(out, f.triple.kappa);
    le::write_f64(out, f.log_prior);
    le::write_f64(out, f.factor.log_det);
    const CMatrix& l = f.factor.lower;
    for (Eigen::Index i = 0; i < l.rows(); ++i)
      for (Eigen::Index j = 0; j < l.cols(); ++j) {
        le::write_f64(out, l(i, j).real());
        le::write_f64(out, l(i, j).imag());
      }
  }
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

FilterBank read_filter_bank(const std::filesystem::path& path,
                            const SourceModel& source) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::format, path.string() + ": " + msg);
  };
  if (bytes.size() < 40 || std::memcmp(bytes.data(), kBankMagic, 4) != 0)
    fail("not a filter bank file");
  if (le::read_u32(bytes.data() + 4) != kBankVersion) fail("unsupported filter bank version");

  FilterBank bank;
  bank.n_ = static_cast<int>(le::read_u32(bytes.data() + 8));
  bank.source_period_ = static_cast<int>(le::read_u32(bytes.data() + 16));
  bank.interference_period_ = static_cast<int>(le::read_u32(bytes.data() + 20));
  const std::size_t nk = le::read_u32(bytes.data() + 24);
  bank.sigma_ = le::read_f64(bytes.data() + 32);
  if (bank.source_period_ != source.period()) fail("source period does not match the model");

  const std::size_t n = static_cast<std::size_t>(bank.n_);
  const std::size_t triples = static_cast<std::size_t>(bank.source_period_) *
                              bank.interference_period_ * nk;
  const std::size_t record = 32 + n * n * 16;
  const std::size_t expected = 40 + nk * 16 + triples * record;
  if (bytes.size() != expected)
    fail("expected " + std::to_string(expected) + " bytes, found " + std::to_string(bytes.size()));

  const unsigned char* p = bytes.data() + 40;
  for (std::size_t k = 0; k < nk; ++k, p += 16)
    bank.kappa_levels_.push_back({le::read_f64(p), le::read_f64(p + 8)});

  std::vector<std::shared_ptr<const CMatrix>> cs(static_cast<std::size_t>(bank.source_period_));
  for (std::size_t t = 0; t < cs.size(); ++t)
    cs[t] = std::make_shared<const CMatrix>(
        conditional_covariance(source, static_cast<int>(t), bank.n_).matrix);

  bank.filters_.resize(triples);
  for (auto& f : bank.filters_) {
    f.triple = {static_cast<int>(le::read_u32(p)), static_cast<int>(le::read_u32(p + 4)),
                le::read_f64(p + 8)};
    f.log_prior = le::read_f64(p + 16);
    f.factor.log_det = le::read_f64(p + 24);
    p += 32;
    f.factor.lower.resize(bank.n_, bank.n_);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j, p += 16)
        f.factor.lower(i, j) = {le::read_f64(p), le::read_f64(p + 8)};
    if (f.triple.tau_s < 0 || f.triple.tau_s >= bank.source_period_)
      fail("triple offset out of range");
    f.source_cov = cs[static_cast<std::size_t>(f.triple.tau_s)];
  }
  return bank;
}

// ------------------------------------------------------------------ posterior

PosteriorTable log_posterior(const FilterBank& bank, const CVector& y) {
  require_length(y.size(), bank.n(), "log_posterior");
  PosteriorTable table;
  table.log_posterior.resize(bank.size());
  for (std::size_t t = 0; t < bank.size(); ++t) {
    const auto& f = bank[t];
    table.log_posterior[t] =
        f.log_prior - solve_forward(f.factor, y).squaredNorm() - f.factor.log_det;
  }
  normalize_log(table.log_posterior);
  return table;
}

namespace {

// Unnormalized log posterior, laid out as [t * columns + m].
std::vector<double> batch_log_joint(const FilterBank& bank, const CMatrix& y) {
  const std::size_t count = bank.size();
  const auto columns = static_cast<std::size_t>(y.cols());
  std::vector<double> log_post(count * columns);
  parallel_for(count, [&](std::size_t t) {
    const auto& f = bank[t];
    const Eigen::VectorXd quad = solve_forward(f.factor, y).colwise().squaredNorm().transpose();
    for (std::size_t m = 0; m < columns; ++m)
      log_post[t * columns + m] = f.log_prior - quad(static_cast<Eigen::Index>(m)) - f.factor.log_det;
  });
  return log_post;
}

}  // namespace

std::vector<PosteriorTable> log_posterior(const FilterBank& bank, const CMatrix& y) {
  require_length(y.rows(), bank.n(), "log_posterior");
  const std::size_t count = bank.size();
  const auto columns = static_cast<std::size_t>(y.cols());
  const auto log_joint = batch_log_joint(bank, y);
  std::vector<PosteriorTable> tables(columns);
  for (std::size_t m = 0; m < columns; ++m) {
    auto& values = tables[m].log_posterior;
    values.resize(count);
    for (std::size_t t = 0; t < count; ++t) values[t] = log_joint[t * columns + m];
    normalize_log(values);
  }
  return tables;
}

CVector mmse_estimate(const FilterBank& bank, const CVector& y,
                      const MmseOptions& options, MmseStats* stats) {
  require_length(y.size(), bank.n(), "mmse_estimate");
  const std::size_t count = bank.size();
  CMatrix whitened(bank.n(), static_cast<Eigen::Index>(count));
  std::vector<double> log_post(count);
  for (std::size_t t = 0; t < count; ++t) {
    const auto& f = bank[t];
    whitened.col(static_cast<Eigen::Index>(t)) = solve_forward(f.factor, y);
    log_post[t] = f.log_prior - whitened.col(static_cast<Eigen::Index>(t)).squaredNorm() -
                  f.factor.log_det;
  }
  normalize_log(log_post);

  MmseStats local;
  CVector out = CVector::Zero(bank.n());
  for (std::size_t t = 0; t < count; ++t) {
    const double weight = std::exp(log_post[t]);
    if (weight < options.posterior_floor) {
      local.skipped_mass += weight;
      ++local.skipped_triples;
      continue;
    }
    const auto& f = bank[t];
    const CVector x = solve_backward(f.factor, CVector(whitened.col(static_cast<Eigen::Index>(t))));
    out += weight * (*f.source_cov * x);
  }
  if (stats) *stats = local;
  return out;
}

CMatrix mmse_estimate(const FilterBank& bank, const CMatrix& y,
                      const MmseOptions& options, std::vector<MmseStats>* stats) {
  require_length(y.rows(), bank.n(), "mmse_estimate");
  const std::size_t count = bank.size();
  const auto columns = static_cast<std::size_t>(y.cols());

  const std::vector<double> log_post = batch_log_joint(bank, y);

  std::vector<double> weights(count * columns);
  std::vector<MmseStats> local(columns);
  std::vector<double> column(count);
  for (std::size_t m = 0; m < columns; ++m) {
    for (std::size_t t = 0; t < count; ++t) column[t] = log_post[t * columns + m];
    normalize_log(column);
    for (std::size_t t = 0; t < count; ++t) {
      const double w = std::exp(column[t]);
      if (w < options.posterior_floor) {
        local[m].skipped_mass += w;
        ++local[m].skipped_triples;
        weights[t * columns + m] = 0.0;
      } else {
        weights[t * columns + m] = w;
      }
    }
  }

  // Summed in triple order per column, matching the single-vector path.
  CMatrix out = CMatrix::Zero(y.rows(), y.cols());
  std::vector<Eigen::Index> cols;
  for (std::size_t t = 0; t < count; ++t) {
    cols.clear();
    for (std::size_t m = 0; m < columns; ++m)
      if (weights[t * columns + m] > 0.0) cols.push_back(static_cast<Eigen::Index>(m));
    if (cols.empty()) continue;
    CMatrix sub(y.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = y.col(cols[c]);
    const CMatrix contribution = oracle_estimate(bank[t], sub);
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const auto m = static_cast<std::size_t>(cols[c]);
      out.col(cols[c]) += weights[t * columns + m] * contribution.col(static_cast<Eigen::Index>(c));
    }
  }
  if (stats) *stats = std::move(local);
  return out;
}

}  // namespace scss
