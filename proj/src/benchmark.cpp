#include "scss/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "scss/error.hpp"
#include "scss/parallel.hpp"
#include "scss/profiles.hpp"

namespace scss {

std::string_view to_string(Estimator estimator) {
  switch (estimator) {
    case Estimator::lmmse: return "lmmse";
    case Estimator::lmmse_known_kappa: return "lmmse_known_kappa";
    case Estimator::oracle: return "oracle";
    case Estimator::mmse: return "mmse";
  }
  return "unknown";
}

std::optional<Estimator> parse_estimator(std::string_view name) {
  for (auto e : {Estimator::lmmse, Estimator::lmmse_known_kappa, Estimator::oracle,
                 Estimator::mmse})
    if (name == to_string(e)) return e;
  return std::nullopt;
}

std::vector<Estimator> parse_estimator_list(std::string_view list) {
  std::vector<Estimator> out;
  while (!list.empty()) {
    const auto comma = list.find(',');
    const auto name = list.substr(0, comma);
    if (!name.empty()) {
      const auto e = parse_estimator(name);
      if (!e) throw Error(ErrorKind::invalid_argument, "unknown estimator '" + std::string(name) + "'");
      if (std::find(out.begin(), out.end(), *e) == out.end()) out.push_back(*e);
    }
    if (comma == std::string_view::npos) break;
    list.remove_prefix(comma + 1);
  }
  return out;
}

void BenchmarkConfig::validate() const {
  mixture.validate();
  if (trials < 1) throw Error(ErrorKind::invalid_argument, "benchmark: trials must be >= 1");
  if (estimators.empty())
    throw Error(ErrorKind::invalid_argument, "benchmark: no estimators selected");
}

const CurveCell* CurveTable::find(std::string_view estimator, double sir_db) const {
  for (const auto& cell : cells)
    if (cell.estimator == estimator && std::abs(cell.sir_db - sir_db) < 1e-9) return &cell;
  return nullptr;
}

MseSummary summarize_mse(std::span<const double> per_trial_mse) {
  const auto count = static_cast<double>(per_trial_mse.size());
  const double mean = pairwise_sum(per_trial_mse) / count;
  std::vector<double> dev(per_trial_mse.size());
  for (std::size_t i = 0; i < dev.size(); ++i) {
    const double d = per_trial_mse[i] - mean;
    dev[i] = d * d;
  }
  // A single trial has no spread estimate; its standard error is reported as 0.
  const double se = per_trial_mse.size() > 1
                        ? std::sqrt(pairwise_sum(dev) / (count - 1.0) / count)
                        : 0.0;
  return {10.0 * std::log10(mean), 10.0 / std::numbers::ln10 * se / mean};
}

namespace {

std::vector<double> per_trial_mse(const CMatrix& estimate, const CMatrix& truth) {
  std::vector<double> out(static_cast<std::size_t>(truth.cols()));
  const double n = static_cast<double>(truth.rows());
  for (Eigen::Index m = 0; m < truth.cols(); ++m)
    out[static_cast<std::size_t>(m)] = (estimate.col(m) - truth.col(m)).squaredNorm() / n;
  return out;
}

// Oracle estimates for trials without a prebuilt bank: one factorization
// per distinct (tau_s, tau_b) in the level.
CMatrix oracle_without_bank(const MixtureConfig& mix, double kappa,
                            const std::vector<Latents>& latents, const CMatrix& y,
                            std::map<int, std::shared_ptr<const CMatrix>>& source_cache) {
  std::map<std::pair<int, int>, std::vector<Eigen::Index>> groups;
  for (std::size_t i = 0; i < latents.size(); ++i)
    groups[{latents[i].tau_s, latents[i].tau_b}].push_back(static_cast<Eigen::Index>(i));
  for (const auto& [key, cols] : groups) {
    if (!source_cache.count(key.first))
      source_cache[key.first] = std::make_shared<const CMatrix>(
          conditional_covariance(mix.source, key.first, mix.n).matrix);
  }

  std::vector<std::pair<std::pair<int, int>, std::vector<Eigen::Index>>> work(groups.begin(),
                                                                              groups.end());
  CMatrix out(y.rows(), y.cols());
  parallel_for(work.size(), [&](std::size_t g) {
    const auto& [key, cols] = work[g];
    const CMatrix cb = conditional_covariance(mix.interference, key.second, mix.n).matrix;
    const OracleFilter filter = make_oracle_filter(source_cache.at(key.first), cb,
                                                   {key.first, key.second, kappa}, mix.sigma);
    CMatrix sub(y.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = y.col(cols[c]);
    const CMatrix est = oracle_estimate(filter, sub);
    for (std::size_t c = 0; c < cols.size(); ++c) out.col(cols[c]) = est.col(static_cast<Eigen::Index>(c));
  });
  return out;
}

}  // namespace

CurveTable run_benchmark(const BenchmarkConfig& config) {
  config.validate();
  const MixtureConfig& mix = config.mixture;
  auto selected = [&](Estimator e) {
    return std::find(config.estimators.begin(), config.estimators.end(), e) !=
           config.estimators.end();
  };

  CurveTable table;
  auto& meta = table.metadata;
  meta.sigma = mix.sigma;
  meta.n = mix.n;
  meta.source_model = mix.source.describe();
  meta.interference_model = mix.interference.describe();
  meta.seed = config.seed;
  meta.trials = config.trials;
  meta.tool_version = std::string(kToolVersion);

  std::vector<Estimator> active;
  std::optional<FilterBank> bank;
  for (Estimator e : config.estimators) {
    if (e == Estimator::mmse) {
      try {
        bank = build_filter_bank(mix.source, mix.interference, mix.kappa_levels, mix.sigma,
                                 mix.n, config.bank_options);
      } catch (const Error& err) {
        if (err.kind() != ErrorKind::infeasible) throw;
        meta.notices.push_back("mmse omitted: " + std::string(err.what()));
        continue;
      }
    }
    active.push_back(e);
  }

  std::optional<CMatrix> source_marginal, interference_marginal;
  std::optional<LmmseFilter> lmmse;
  if (selected(Estimator::lmmse) || selected(Estimator::lmmse_known_kappa)) {
    source_marginal = marginal_covariance(mix.source, mix.n).matrix;
    interference_marginal = marginal_covariance(mix.interference, mix.n).matrix;
  }
  if (selected(Estimator::lmmse))
    lmmse = build_lmmse(*source_marginal, *interference_marginal, mix.mean_kappa_squared(),
                        mix.sigma);

  std::map<int, std::shared_ptr<const CMatrix>> source_cache;
  const auto trials = static_cast<std::size_t>(config.trials);
  std::map<Estimator, std::vector<CurveCell>> cells;

  for (std::size_t level = 0; level < mix.kappa_levels.size(); ++level) {
    const double kappa = mix.kappa_levels[level].kappa;
    // Trims the round-trip noise of the dB conversion (-5.9999999999999991)
    // and turns -0 into 0.
    const double sir = std::round(kappa_to_sir(kappa) * 1e9) / 1e9 + 0.0;

    CMatrix y(mix.n, static_cast<Eigen::Index>(trials));
    CMatrix s(mix.n, static_cast<Eigen::Index>(trials));
    std::vector<Latents> latents(trials);
    parallel_for(trials, [&](std::size_t i) {
      RandomStream rng = RandomStream::derive(config.seed, level, i);
      MixtureRecord rec = synthesize_fixed_kappa(mix, kappa, rng);
      y.col(static_cast<Eigen::Index>(i)) = rec.y;
      s.col(static_cast<Eigen::Index>(i)) = rec.s;
      latents[i] = rec.latents;
    });

    for (Estimator e : active) {
      CMatrix estimate;
      switch (e) {
        case Estimator::lmmse:
          estimate = lmmse_estimate(*lmmse, y);
          break;
        case Estimator::lmmse_known_kappa:
          estimate = lmmse_estimate(
              build_lmmse(*source_marginal, *interference_marginal, kappa * kappa, mix.sigma), y);
          break;
        case Estimator::oracle:
          if (bank) {
            estimate.resize(y.rows(), y.cols());
            for (std::size_t i = 0; i < trials; ++i) {
              const auto& f = bank->at({latents[i].tau_s, latents[i].tau_b, kappa});
              estimate.col(static_cast<Eigen::Index>(i)) =
                  oracle_estimate(f, CVector(y.col(static_cast<Eigen::Index>(i))));
            }
          } else {
            estimate = oracle_without_bank(mix, kappa, latents, y, source_cache);
          }
          break;
        case Estimator::mmse: {
          std::vector<MmseStats> stats;
          estimate = mmse_estimate(*bank, y, config.mmse_options, &stats);
          for (const auto& st : stats)
            meta.max_skipped_posterior_mass =
                std::max(meta.max_skipped_posterior_mass, st.skipped_mass);
          break;
        }
      }
      const auto mse = per_trial_mse(estimate, s);
      const auto summary = summarize_mse(mse);
      cells[e].push_back({std::string(to_string(e)), sir, summary.mse_db, summary.stderr_db,
                          config.trials});
    }
  }

  for (Estimator e : active)
    for (auto& cell : cells[e]) table.cells.push_back(std::move(cell));
  return table;
}

// ------------------------------------------------------------------ output

std::optional<CurveFormat> parse_curve_format(std::string_view name) {
  if (name == "csv") return CurveFormat::csv;
  if (name == "json") return CurveFormat::json;
  return std::nullopt;
}

nlohmann::json curves_to_json(const CurveTable& table) {
  const auto& m = table.metadata;
  nlohmann::json meta = {{"sigma", m.sigma},
                         {"n", m.n},
                         {"source_model", m.source_model},
                         {"interference_model", m.interference_model},
                         {"seed", m.seed},
                         {"trials", m.trials},
                         {"tool_version", m.tool_version},
                         {"notices", m.notices},
                         {"max_skipped_posterior_mass", m.max_skipped_posterior_mass}};
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : table.cells)
    cells.push_back({{"estimator", c.estimator},
                     {"sir_db", c.sir_db},
                     {"mse_db", c.mse_db},
                     {"stderr_db", c.stderr_db},
                     {"trials", c.trials}});
  return {{"metadata", meta}, {"cells", cells}};
}

CurveTable curves_from_json(const nlohmann::json& j) {
  try {
    CurveTable table;
    const auto& m = j.at("metadata");
    auto& meta = table.metadata;
    meta.sigma = m.at("sigma").get<double>();
    meta.n = m.at("n").get<int>();
    meta.source_model = m.at("source_model").get<std::string>();
    meta.interference_model = m.at("interference_model").get<std::string>();
    meta.seed = m.at("seed").get<std::uint64_t>();
    meta.trials = m.at("trials").get<int>();
    meta.tool_version = m.at("tool_version").get<std::string>();
    meta.notices = m.at("notices").get<std::vector<std::string>>();
    meta.max_skipped_posterior_mass = m.at("max_skipped_posterior_mass").get<double>();
    for (const auto& c : j.at("cells"))
      table.cells.push_back({c.at("estimator").get<std::string>(), c.at("sir_db").get<double>(),
                             c.at("mse_db").get<double>(), c.at("stderr_db").get<double>(),
                             c.at("trials").get<int>()});
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, std::string("curve json: ") + e.what());
  }
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void emit_curves(const CurveTable& table, const std::filesystem::path& path,
                 CurveFormat format) {
  if (table.cells.empty())
    throw Error(ErrorKind::invalid_argument, "emit_curves: table has no cells");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
  if (format == CurveFormat::csv) {
    out << "estimator,sir_db,mse_db,stderr_db,trials\n";
    for (const auto& c : table.cells)
      out << c.estimator << ',' << format_double(c.sir_db) << ',' << format_double(c.mse_db)
          << ',' << format_double(c.stderr_db) << ',' << c.trials << '\n';
  } else {
    out << curves_to_json(table).dump(2) << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

CurveTable parse_curves(const std::filesystem::path& path, CurveFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  if (format == CurveFormat::json) {
    try {
      return curves_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::format, path.string() + ": " + e.what());
    }
  }

  CurveTable table;
  std::string line;
  if (!std::getline(in, line) || line != "estimator,sir_db,mse_db,stderr_db,trials")
    throw Error(ErrorKind::format, path.string() + ": missing curve CSV header");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream row(line);
    std::string field;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() != 5)
      throw Error(ErrorKind::format,
                  path.string() + ": line " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields");
    try {
      table.cells.push_back({fields[0], std::stod(fields[1]), std::stod(fields[2]),
                             std::stod(fields[3]), std::stoi(fields[4])});
    } catch (const std::exception&) {
      throw Error(ErrorKind::format,
                  path.string() + ": unparsable number on line " + std::to_string(line_no));
    }
  }
  return table;
}

}  // namespace scss
