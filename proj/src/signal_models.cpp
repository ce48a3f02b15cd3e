#include "scss/signal_models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include "scss/error.hpp"

namespace scss {

namespace {

using std::numbers::pi;

long floor_div(long a, long b) {
  long q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

long ceil_div(long a, long b) { return -floor_div(-a, b); }

double rrc_value(double t, double beta) {
  if (t == 0.0) return 1.0 - beta + 4.0 * beta / pi;
  const double x = 4.0 * beta * t;
  if (std::abs(std::abs(x) - 1.0) < 1e-12) {
    return beta / std::numbers::sqrt2 *
           ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * beta)) +
            (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * beta)));
  }
  return (std::sin(pi * t * (1.0 - beta)) +
          x * std::cos(pi * t * (1.0 + beta))) /
         (pi * t * (1.0 - x * x));
}

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorKind::invalid_argument, message);
}

void require_scale(double scale) {
  require(std::isfinite(scale) && scale > 0.0,
          "power_scale must be finite and positive");
}

// Hermitian Gram matrix a * a^H with an exactly real diagonal.
CMatrix hermitian_gram(const CMatrix& a) {
  const Eigen::Index n = a.rows();
  CMatrix g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    g(i, i) = a.row(i).squaredNorm();
    for (Eigen::Index j = 0; j < i; ++j) {
      std::complex<double> acc{0.0, 0.0};
      for (Eigen::Index k = 0; k < a.cols(); ++k) acc += a(i, k) * std::conj(a(j, k));
      g(i, j) = acc;
      g(j, i) = std::conj(acc);
    }
  }
  return g;
}

}  // namespace

std::vector<double> rrc_taps(double rolloff, int sps, int span_symbols) {
  require(rolloff > 0.0 && rolloff <= 1.0, "rrc_taps: rolloff must lie in (0, 1]");
  require(sps >= 1, "rrc_taps: sps must be >= 1");
  require(span_symbols >= 2 && span_symbols % 2 == 0,
          "rrc_taps: span_symbols must be even and >= 2");

  const int half = span_symbols * sps / 2;
  std::vector<double> taps(static_cast<std::size_t>(2 * half + 1));
  for (int k = -half; k <= half; ++k) {
    // Symmetric by construction: evaluate at |k|.
    const double t = static_cast<double>(std::abs(k)) / sps;
    taps[static_cast<std::size_t>(k + half)] = rrc_value(t, rolloff);
  }
  double energy = 0.0;
  for (double g : taps) energy += g * g;
  for (double& g : taps) {
    g /= std::sqrt(energy);
    if (!std::isfinite(g))
      throw Error(ErrorKind::internal, "rrc_taps: non-finite tap");
  }
  return taps;
}

// ---------------------------------------------------------------- block

BlockCovModel::BlockCovModel(CMatrix block, int buffer_length,
                             std::uint64_t seed, double power_scale)
    : block_(std::move(block)),
      buffer_length_(buffer_length),
      seed_(seed),
      power_scale_(power_scale) {
  require(block_.rows() >= 1 && block_.rows() == block_.cols(),
          "block model: block must be square and nonempty");
  require(buffer_length_ >= block_.rows() && buffer_length_ % block_.rows() == 0,
          "block model: buffer_length must be a positive multiple of the period");
  require(block_.allFinite(), "block model: non-finite block entry");
  require_scale(power_scale_);
  gram_ = hermitian_gram(block_);
}

BlockCovModel BlockCovModel::generate(int period, int buffer_length,
                                      std::uint64_t seed) {
  require(period >= 1, "block model: period must be >= 1");
  RandomStream rng(seed);
  CMatrix block(period, period);
  for (int i = 0; i < period; ++i)
    for (int j = 0; j < period; ++j) block(i, j) = rng.complex_normal();
  return BlockCovModel(std::move(block), buffer_length, seed);
}

BlockCovModel BlockCovModel::with_power_scale(double scale) const {
  require_scale(scale);
  BlockCovModel copy = *this;
  copy.power_scale_ = scale;
  return copy;
}

std::complex<double> BlockCovModel::raw_autocovariance(long u, long v) const {
  const long p = period();
  if (floor_div(u, p) != floor_div(v, p)) return {0.0, 0.0};
  return gram_(u - floor_div(u, p) * p, v - floor_div(v, p) * p);
}

// ---------------------------------------------------------------- rrc

RRCModel::RRCModel(int sps, int span_symbols, double rolloff,
                   double power_scale)
    : sps_(sps),
      span_symbols_(span_symbols),
      rolloff_(rolloff),
      taps_(rrc_taps(rolloff, sps, span_symbols)),
      power_scale_(power_scale) {
  require_scale(power_scale_);
}

RRCModel RRCModel::with_power_scale(double scale) const {
  require_scale(scale);
  RRCModel copy = *this;
  copy.power_scale_ = scale;
  return copy;
}

std::complex<double> RRCModel::raw_autocovariance(long u, long v) const {
  const long len = static_cast<long>(taps_.size());
  const long lo = std::max(u, v) - (len - 1);
  const long hi = std::min(u, v);
  double acc = 0.0;
  for (long p = ceil_div(lo, sps_); p <= floor_div(hi, sps_); ++p) {
    acc += taps_[static_cast<std::size_t>(u - p * sps_)] *
           taps_[static_cast<std::size_t>(v - p * sps_)];
  }
  return {acc, 0.0};
}

// ---------------------------------------------------------------- ofdm

OFDMModel::OFDMModel(int n_subcarriers, int cp_length, std::vector<int> active,
                     double power_scale)
    : n_subcarriers_(n_subcarriers),
      cp_length_(cp_length),
      active_(std::move(active)),
      power_scale_(power_scale) {
  require(n_subcarriers_ >= 1, "ofdm model: n_subcarriers must be >= 1");
  require(cp_length_ >= 0, "ofdm model: cp_length must be >= 0");
  require_scale(power_scale_);
  if (active_.empty()) {
    for (int l = 1; l < n_subcarriers_; ++l) active_.push_back(l);
  }
  require(!active_.empty(), "ofdm model: active subcarrier set is empty");
  std::sort(active_.begin(), active_.end());
  require(std::adjacent_find(active_.begin(), active_.end()) == active_.end(),
          "ofdm model: duplicate active subcarrier");
  require(active_.front() >= 0 && active_.back() < n_subcarriers_,
          "ofdm model: active subcarrier index out of range");

  const int nb = period();
  const auto count = static_cast<Eigen::Index>(active_.size());
  basis_.resize(nb, count);
  for (int n = 0; n < nb; ++n) {
    for (Eigen::Index a = 0; a < count; ++a) {
      // Reduce the phase index first so the CP samples are bit-identical
      // copies of the symbol tail.
      const long k = (static_cast<long>(active_[static_cast<std::size_t>(a)]) *
                      (n - cp_length_)) %
                     n_subcarriers_;
      const long kk = k < 0 ? k + n_subcarriers_ : k;
      const double phase = 2.0 * pi * static_cast<double>(kk) / n_subcarriers_;
      basis_(n, a) = std::polar(1.0, phase);
    }
  }
  symbol_cov_ = hermitian_gram(basis_) / static_cast<double>(n_subcarriers_);
}

OFDMModel OFDMModel::with_power_scale(double scale) const {
  require_scale(scale);
  OFDMModel copy = *this;
  copy.power_scale_ = scale;
  return copy;
}

std::complex<double> OFDMModel::raw_autocovariance(long u, long v) const {
  const long nb = period();
  if (floor_div(u, nb) != floor_div(v, nb)) return {0.0, 0.0};
  return symbol_cov_(u - floor_div(u, nb) * nb, v - floor_div(v, nb) * nb);
}

// ---------------------------------------------------------------- dispatch

int SourceModel::period() const {
  return std::visit([](const auto& m) { return m.period(); }, model_);
}

double SourceModel::power_scale() const {
  return std::visit([](const auto& m) { return m.power_scale(); }, model_);
}

SourceModel SourceModel::with_power_scale(double scale) const {
  return std::visit(
      [scale](const auto& m) { return SourceModel(m.with_power_scale(scale)); },
      model_);
}

std::string SourceModel::kind() const {
  switch (model_.index()) {
    case 0: return "block";
    case 1: return "rrc";
    default: return "ofdm";
  }
}

std::string SourceModel::describe() const {
  std::ostringstream out;
  out.precision(17);
  if (const auto* b = std::get_if<BlockCovModel>(&model_)) {
    out << "block(P=" << b->period() << ",buffer=" << b->buffer_length()
        << ",seed=" << b->seed() << ")";
  } else if (const auto* r = std::get_if<RRCModel>(&model_)) {
    out << "rrc(sps=" << r->sps() << ",span=" << r->span_symbols()
        << ",rolloff=" << r->rolloff() << ")";
  } else {
    const auto& o = std::get<OFDMModel>(model_);
    out << "ofdm(nsc=" << o.n_subcarriers() << ",ncp=" << o.cp_length()
        << ",active=" << o.active().size() << ")";
  }
  return out.str();
}

long SourceModel::max_window(long start) const {
  if (const auto* b = std::get_if<BlockCovModel>(&model_))
    return std::max(0L, b->buffer_length() - start);
  return std::numeric_limits<int>::max();
}

std::complex<double> SourceModel::autocovariance(long u, long v) const {
  return std::visit(
      [u, v](const auto& m) {
        return m.power_scale() * m.power_scale() * m.raw_autocovariance(u, v);
      },
      model_);
}

// ---------------------------------------------------------------- sampling

namespace {

void check_window(const SourceModel& model, long start, int n) {
  require(n >= 1, "window length must be >= 1");
  require(start >= 0, "window start must be >= 0");
  if (n > model.max_window(start)) {
    std::ostringstream msg;
    msg << model.describe() << ": window of " << n << " samples at offset "
        << start << " exceeds the supported length " << model.max_window(start);
    throw Error(ErrorKind::invalid_argument, msg.str());
  }
}

void check_tau(const SourceModel& model, int tau) {
  if (tau < 0 || tau >= model.period()) {
    std::ostringstream msg;
    msg << "offset tau=" << tau << " outside [0, " << model.period() << ")";
    throw Error(ErrorKind::invalid_argument, msg.str());
  }
}

CVector sample_block(const BlockCovModel& m, long start, int n,
                     RandomStream& rng) {
  const long p = m.period();
  CVector out(n);
  CVector drivers(p);
  for (long blk = floor_div(start, p); blk <= floor_div(start + n - 1, p); ++blk) {
    for (long j = 0; j < p; ++j) drivers(j) = rng.complex_normal();
    const CVector x = m.block() * drivers;
    for (long i = 0; i < p; ++i) {
      const long idx = blk * p + i - start;
      if (idx >= 0 && idx < n) out(idx) = x(i);
    }
  }
  return out;
}

CVector sample_rrc(const RRCModel& m, long start, int n, RandomStream& rng) {
  const auto& g = m.taps();
  const long len = static_cast<long>(g.size());
  const long sps = m.sps();
  CVector out = CVector::Zero(n);
  for (long p = ceil_div(start - (len - 1), sps);
       p <= floor_div(start + n - 1, sps); ++p) {
    const std::complex<double> a = rng.complex_normal();
    const long k0 = std::max(0L, start - p * sps);
    const long k1 = std::min(len, start + n - p * sps);
    for (long k = k0; k < k1; ++k) out(p * sps + k - start) += a * g[static_cast<std::size_t>(k)];
  }
  return out;
}

CVector sample_ofdm(const OFDMModel& m, long start, int n, RandomStream& rng) {
  const long nb = m.period();
  const auto count = static_cast<int>(m.active().size());
  const double norm = 1.0 / std::sqrt(static_cast<double>(m.n_subcarriers()));
  CVector out(n);
  std::vector<std::complex<double>> symbols(static_cast<std::size_t>(count));
  for (long p = floor_div(start, nb); p <= floor_div(start + n - 1, nb); ++p) {
    for (auto& a : symbols) a = rng.complex_normal();
    const long i0 = std::max(0L, start - p * nb);
    const long i1 = std::min(nb, start + n - p * nb);
    for (long i = i0; i < i1; ++i) {
      std::complex<double> acc{0.0, 0.0};
      for (int a = 0; a < count; ++a)
        acc += symbols[static_cast<std::size_t>(a)] * m.basis(static_cast<int>(i), a);
      out(p * nb + i - start) = norm * acc;
    }
  }
  return out;
}

}  // namespace

CVector sample_source(const SourceModel& model, int tau, int n,
                      RandomStream& rng) {
  check_tau(model, tau);
  check_window(model, tau, n);
  CVector x = std::visit(
      [&](const auto& m) -> CVector {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, BlockCovModel>) return sample_block(m, tau, n, rng);
        else if constexpr (std::is_same_v<T, RRCModel>) return sample_rrc(m, tau, n, rng);
        else return sample_ofdm(m, tau, n, rng);
      },
      model.variant());
  return x * model.power_scale();
}

// ---------------------------------------------------------------- covariance

CMatrix window_covariance(const SourceModel& model, long start, int n) {
  check_window(model, start, n);
  CMatrix c(n, n);
  for (int i = 0; i < n; ++i) {
    c(i, i) = model.autocovariance(start + i, start + i).real();
    for (int j = 0; j < i; ++j) {
      const auto value = model.autocovariance(start + i, start + j);
      c(i, j) = value;
      c(j, i) = std::conj(value);
    }
  }
  return c;
}

ConditionalCovariance conditional_covariance(const SourceModel& model, int tau,
                                             int n) {
  check_tau(model, tau);
  return {tau, window_covariance(model, tau, n)};
}

MarginalCovariance marginal_covariance(const SourceModel& model, int n) {
  const int p = model.period();
  CMatrix sum = CMatrix::Zero(n, n);
  for (int tau = 0; tau < p; ++tau) sum += conditional_covariance(model, tau, n).matrix;
  MarginalCovariance out{sum / static_cast<double>(p)};

  const auto& m = out.matrix;
  const double tol = 1e-12 * std::max(1.0, m.diagonal().real().maxCoeff());
  for (int i = 1; i < n; ++i) {
    for (int j = 1; j < n; ++j) {
      if (std::abs(m(i, j) - m(i - 1, j - 1)) > tol) {
        std::ostringstream msg;
        msg << "marginal covariance of " << model.describe()
            << " is not Toeplitz at (" << i << ", " << j << ")";
        throw Error(ErrorKind::internal, msg.str());
      }
    }
  }
  return out;
}

double average_power(const SourceModel& model) {
  const int p = model.period();
  double acc = 0.0;
  for (int r = 0; r < p; ++r) acc += model.autocovariance(r, r).real();
  return acc / p;
}

SourceModel normalize_power(const SourceModel& model) {
  const double raw = average_power(model.with_power_scale(1.0));
  if (!std::isfinite(raw) || raw <= 0.0) {
    throw Error(ErrorKind::invalid_argument,
                "normalize_power: " + model.describe() + " has zero or non-finite power");
  }
  return model.with_power_scale(1.0 / std::sqrt(raw));
}

// ---------------------------------------------------------------- config io

nlohmann::json model_to_json(const SourceModel& model) {
  nlohmann::json j;
  j["kind"] = model.kind();
  j["period"] = model.period();
  j["power_scale"] = model.power_scale();
  if (const auto* b = std::get_if<BlockCovModel>(&model.variant())) {
    j["buffer_length"] = b->buffer_length();
    j["seed"] = b->seed();
    std::vector<double> re, im;
    for (int i = 0; i < b->period(); ++i) {
      for (int k = 0; k < b->period(); ++k) {
        re.push_back(b->block()(i, k).real());
        im.push_back(b->block()(i, k).imag());
      }
    }
    j["block"] = {{"re", re}, {"im", im}};
  } else if (const auto* r = std::get_if<RRCModel>(&model.variant())) {
    j["sps"] = r->sps();
    j["span_symbols"] = r->span_symbols();
    j["rolloff"] = r->rolloff();
  } else {
    const auto& o = std::get<OFDMModel>(model.variant());
    j["n_subcarriers"] = o.n_subcarriers();
    j["cp_length"] = o.cp_length();
    j["active_subcarriers"] = o.active();
  }
  return j;
}

SourceModel model_from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    const double scale = j.value("power_scale", 1.0);
    std::optional<SourceModel> model;
    if (kind == "block") {
      const int period = j.at("period").get<int>();
      const int buffer = j.at("buffer_length").get<int>();
      const auto seed = j.value("seed", std::uint64_t{0});
      if (j.contains("block")) {
        const auto re = j.at("block").at("re").get<std::vector<double>>();
        const auto im = j.at("block").at("im").get<std::vector<double>>();
        const auto expected = static_cast<std::size_t>(period) * period;
        if (re.size() != expected || im.size() != expected)
          throw Error(ErrorKind::format, "block model: block has wrong entry count");
        CMatrix block(period, period);
        for (int i = 0; i < period; ++i)
          for (int k = 0; k < period; ++k) {
            const auto idx = static_cast<std::size_t>(i) * period + k;
            block(i, k) = {re[idx], im[idx]};
          }
        model = BlockCovModel(std::move(block), buffer, seed, scale);
      } else {
        model = BlockCovModel::generate(period, buffer, seed).with_power_scale(scale);
      }
    } else if (kind == "rrc") {
      model = RRCModel(j.at("sps").get<int>(), j.at("span_symbols").get<int>(),
                       j.at("rolloff").get<double>(), scale);
    } else if (kind == "ofdm") {
      model = OFDMModel(j.at("n_subcarriers").get<int>(),
                        j.at("cp_length").get<int>(),
                        j.value("active_subcarriers", std::vector<int>{}), scale);
    } else {
      throw Error(ErrorKind::format, "unknown model kind '" + kind + "'");
    }
    if (j.contains("period") && j.at("period").get<int>() != model->period())
      throw Error(ErrorKind::format, "model config: period does not match shape parameters");
    return *model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, std::string("model config: ") + e.what());
  }
}

void save_model(const SourceModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
  out << model_to_json(model).dump(2) << '\n';
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

SourceModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  try {
    return model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, path.string() + ": " + e.what());
  }
}

}  // namespace scss
