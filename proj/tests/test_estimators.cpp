#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "scss/error.hpp"
#include "scss/estimators.hpp"
#include "scss/profiles.hpp"
#include "test_support.hpp"

using namespace scss;

namespace {

MixtureConfig toy_config(int n, int ps, int pb, std::vector<KappaLevel> levels, double sigma) {
  return MixtureConfig{normalize_power(BlockCovModel::generate(ps, 120, 1000 + ps)),
                       normalize_power(BlockCovModel::generate(pb, 120, 2000 + pb)), n, sigma,
                       std::move(levels)};
}

CMatrix random_matrix(int rows, int cols, RandomStream& rng) {
  CMatrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = rng.complex_normal();
  return m;
}

double rel_error(const CVector& a, const CVector& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

// Conditional mean by enumerating every triple with dense inverses and
// explicit Gaussian likelihoods.
CVector brute_force_mmse(const MixtureConfig& c, const CVector& y) {
  struct Term {
    double log_weight;
    CVector estimate;
  };
  std::vector<Term> terms;
  const int n = c.n;
  for (int ts = 0; ts < c.source.period(); ++ts) {
    const CMatrix cs = conditional_covariance(c.source, ts, n).matrix;
    for (int tb = 0; tb < c.interference.period(); ++tb) {
      const CMatrix cb = conditional_covariance(c.interference, tb, n).matrix;
      for (const auto& level : c.kappa_levels) {
        const CMatrix cy = cs + level.kappa * level.kappa * cb +
                           c.sigma * c.sigma * CMatrix::Identity(n, n);
        const CMatrix inv = cy.inverse();
        const double quad = (y.adjoint() * inv * y)(0, 0).real();
        const double logdet = std::log(cy.determinant().real());
        const double prior = level.prior / (c.source.period() * c.interference.period());
        terms.push_back({std::log(prior) - quad - logdet, cs * inv * y});
      }
    }
  }
  double peak = -1e300;
  for (const auto& t : terms) peak = std::max(peak, t.log_weight);
  double total = 0.0;
  for (const auto& t : terms) total += std::exp(t.log_weight - peak);
  CVector out = CVector::Zero(n);
  for (const auto& t : terms) out += std::exp(t.log_weight - peak) / total * t.estimate;
  return out;
}

}  // namespace

TEST_CASE("lmmse limiting cases") {
  const auto config = toy_config(16, 4, 3, {{1.0, 1.0}}, 0.1);
  const CMatrix cs = marginal_covariance(config.source, 16).matrix;
  const CMatrix cb = marginal_covariance(config.interference, 16).matrix;
  const CMatrix id = CMatrix::Identity(16, 16);

  CHECK((build_lmmse(cs, cb, 0.0, 0.0).w - id).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((build_lmmse(cs, cs, 1.0, 0.0).w - 0.5 * id).cwiseAbs().maxCoeff() <= 1e-9);

  const CMatrix rank_one = CVector::Ones(16) * CVector::Ones(16).adjoint();
  try {
    build_lmmse(rank_one, rank_one, 1.0, 0.0);
    FAIL("expected singular_covariance");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::singular_covariance);
    CHECK(std::string(e.what()).find("pivot") != std::string::npos);
  }
}

TEST_CASE("lmmse is linear") {
  const auto config = toy_config(16, 4, 3, {{0.5, 0.5}, {2.0, 0.5}}, 0.2);
  const auto filter =
      build_lmmse(config.source, config.interference, config.kappa_levels, config.sigma, 16);
  CHECK(lmmse_estimate(filter, CVector(CVector::Zero(16))).cwiseAbs().maxCoeff() == 0.0);
  RandomStream rng(3);
  const CVector y = random_matrix(16, 1, rng).col(0);
  const std::complex<double> alpha(0.7, -2.5);
  CHECK(rel_error(lmmse_estimate(filter, CVector(alpha * y)), alpha * lmmse_estimate(filter, y)) <=
        1e-12);
  CHECK_THROWS_AS(lmmse_estimate(filter, CVector(CVector::Zero(15))), Error);
}

TEST_CASE("lmmse matches the sample regression of s on y") {
  const int n = 8;
  const auto config = toy_config(n, 4, 3, {{0.5, 1.0 / 3}, {1.0, 1.0 / 3}, {2.0, 1.0 / 3}}, 0.3);
  const auto filter =
      build_lmmse(config.source, config.interference, config.kappa_levels, config.sigma, n);
  const std::size_t total = 1000000, block = 50000;

  // Real-valued view: regressors x = [Re y; Im y], one regression per
  // real and imaginary part of each entry of s.
  auto realify = [&](const std::vector<MixtureRecord>& recs, Eigen::MatrixXd& x, Eigen::MatrixXd& t) {
    x.resize(static_cast<Eigen::Index>(recs.size()), 2 * n);
    t.resize(static_cast<Eigen::Index>(recs.size()), 2 * n);
    for (std::size_t r = 0; r < recs.size(); ++r) {
      const auto i = static_cast<Eigen::Index>(r);
      x.row(i) << recs[r].y.real().transpose(), recs[r].y.imag().transpose();
      t.row(i) << recs[r].s.real().transpose(), recs[r].s.imag().transpose();
    }
  };
  Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(2 * n, 2 * n), xtt = xtx;
  for (std::size_t start = 0; start < total; start += block) {
    Eigen::MatrixXd x, t;
    realify(make_dataset(config, block, 40 + start / block), x, t);
    xtx += x.transpose() * x;
    xtt += x.transpose() * t;
  }
  const Eigen::MatrixXd xtx_inv = xtx.inverse();
  const Eigen::MatrixXd beta = xtx_inv * xtt;  // column j regresses target j

  std::vector<Eigen::MatrixXd> meat(2 * n, Eigen::MatrixXd::Zero(2 * n, 2 * n));
  for (std::size_t start = 0; start < total; start += block) {
    Eigen::MatrixXd x, t;
    realify(make_dataset(config, block, 40 + start / block), x, t);
    const Eigen::MatrixXd resid = t - x * beta;
    for (int j = 0; j < 2 * n; ++j) {
      const Eigen::MatrixXd xe = x.array().colwise() * resid.col(j).array();
      meat[j] += xe.transpose() * xe;
    }
  }

  // Coefficients implied by W for the real regressions.
  const Eigen::MatrixXd wr = filter.w.real(), wi = filter.w.imag();
  Eigen::MatrixXd expected(2 * n, 2 * n);
  expected.topLeftCorner(n, n) = wr.transpose();
  expected.bottomLeftCorner(n, n) = -wi.transpose();
  expected.topRightCorner(n, n) = wi.transpose();
  expected.bottomRightCorner(n, n) = wr.transpose();

  double worst = 0.0;
  for (int j = 0; j < 2 * n; ++j) {
    const Eigen::MatrixXd cov = xtx_inv * meat[j] * xtx_inv;
    for (int i = 0; i < 2 * n; ++i)
      worst = std::max(worst, std::abs(beta(i, j) - expected(i, j)) / std::sqrt(cov(i, i)));
  }
  MESSAGE("max regression z = " << worst);
  CHECK(worst < 5.0);
}

TEST_CASE("lmmse error is orthogonal to the observation") {
  const int n = 64;
  auto config = profile_mixture(Profile::s51, 0.1);
  config.n = n;
  const auto filter =
      build_lmmse(config.source, config.interference, config.kappa_levels, config.sigma, n);
  testing::OuterProductMoments moments(n);
  const std::size_t block = 10000;
  for (std::size_t b = 0; b < 10; ++b) {
    const auto records = make_dataset(config, block, 600 + b);
    CMatrix y(n, block), s(n, block);
    for (std::size_t i = 0; i < block; ++i) {
      y.col(static_cast<Eigen::Index>(i)) = records[i].y;
      s.col(static_cast<Eigen::Index>(i)) = records[i].s;
    }
    moments.add(s - lmmse_estimate(filter, y), y);
  }
  const double z = moments.max_z(CMatrix::Zero(n, n));
  MESSAGE("max orthogonality z = " << z);
  CHECK(z < 5.0);
}

TEST_CASE("filter bank sizes and the memory budget") {
  const auto s51 = profile_mixture(Profile::s51, 0.1);
  CHECK(filter_bank_memory_bytes(11, 5, 5, 256) == 275.0 * 256 * 256 * 16);
  const auto s52 = profile_mixture(Profile::s52, 0.1);
  CHECK(filter_bank_memory_bytes(16, 80, 23, 1280) > static_cast<double>(kDefaultMemoryBudget));
  try {
    build_filter_bank(s52.source, s52.interference, s52.kappa_levels, s52.sigma, s52.n);
    FAIL("expected infeasible");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::infeasible);
    CHECK(std::string(e.what()).find("29440") != std::string::npos);
  }
  CHECK_THROWS_AS(build_filter_bank(s51.source, s51.interference, s51.kappa_levels, 0.0, 32),
                  Error);

  auto small = s51;
  small.n = 32;
  const auto bank =
      build_filter_bank(small.source, small.interference, small.kappa_levels, small.sigma, small.n);
  CHECK(bank.size() == 275);
  for (const auto& f : bank.filters()) CHECK(std::isfinite(f.factor.log_det));
  const auto& f = bank.at({7, 3, small.kappa_levels[2].kappa});
  CHECK(f.triple.tau_s == 7);
  CHECK(f.triple.tau_b == 3);
  CHECK_FALSE(bank.find({11, 0, small.kappa_levels[0].kappa}).has_value());
  CHECK_THROWS_AS(bank.at({0, 0, 0.123}), Error);
}

TEST_CASE("oracle estimate against dense evaluation") {
  const auto config = toy_config(6, 2, 2, {{0.7, 0.5}, {1.4, 0.5}}, 0.3);
  const auto bank = build_filter_bank(config.source, config.interference, config.kappa_levels,
                                      config.sigma, 6);
  RandomStream rng(8);
  for (const auto& f : bank.filters()) {
    const CMatrix cs = conditional_covariance(config.source, f.triple.tau_s, 6).matrix;
    const CMatrix cb = conditional_covariance(config.interference, f.triple.tau_b, 6).matrix;
    const CMatrix cy = cs + f.triple.kappa * f.triple.kappa * cb + 0.09 * CMatrix::Identity(6, 6);
    const CMatrix h = cs * cy.inverse();
    for (int r = 0; r < 5; ++r) {
      const CVector y = random_matrix(6, 1, rng).col(0);
      CHECK(rel_error(oracle_estimate(f, y), h * y) <= 1e-9);
    }
    const double analytic = (cs - h * cs.adjoint()).trace().real() / 6.0;
    CHECK(std::abs(oracle_mse_analytic(f) - analytic) <= 1e-12);
    CHECK(oracle_mse_analytic(f) > 0.0);
    CHECK(std::abs(f.factor.log_det - std::log(cy.determinant().real())) <= 1e-10);
  }
}

TEST_CASE("oracle limits") {
  auto config = profile_mixture(Profile::s51, 1e-6);
  config.n = 64;
  SUBCASE("no interference, tiny noise passes y through") {
    const SourceModel zero = BlockCovModel(CMatrix::Zero(5, 5), 550);
    const auto bank = build_filter_bank(config.source, zero, config.kappa_levels, 1e-6, 64);
    RandomStream rng(2);
    for (int ts = 0; ts < 11; ++ts) {
      const CVector y = sample_source(config.source, ts, 64, rng);
      const CVector est = oracle_estimate(bank, y, ts, 0, config.kappa_levels[0].kappa);
      CHECK(rel_error(est, y) < 1e-3);
    }
  }
  SUBCASE("zero source estimates zero") {
    const SourceModel zero = BlockCovModel(CMatrix::Zero(11, 11), 550);
    const auto bank = build_filter_bank(zero, config.interference, config.kappa_levels, 0.1, 64);
    RandomStream rng(2);
    const CVector y = random_matrix(64, 1, rng).col(0);
    CHECK(oracle_estimate(bank, y, 3, 1, config.kappa_levels[1].kappa).cwiseAbs().maxCoeff() == 0.0);
    CHECK(oracle_mse_analytic(bank, 3, 1, config.kappa_levels[1].kappa) == 0.0);
  }
  SUBCASE("overwhelming noise leaves the prior power") {
    // A whole number of source periods keeps trace(Cs) / N at exactly 1.
    const auto bank =
        build_filter_bank(config.source, config.interference, config.kappa_levels, 1e3, 55);
    for (const auto& f : bank.filters()) {
      const double mse = oracle_mse_analytic(f);
      CHECK(mse >= 0.99);
      CHECK(mse <= 1.0);
    }
  }
  SUBCASE("oracle is linear") {
    const auto bank =
        build_filter_bank(config.source, config.interference, config.kappa_levels, 0.1, 64);
    RandomStream rng(4);
    const CVector y = random_matrix(64, 1, rng).col(0);
    const std::complex<double> alpha(-1.5, 0.25);
    const auto& f = bank[17];
    CHECK(rel_error(oracle_estimate(f, CVector(alpha * y)), alpha * oracle_estimate(f, y)) <= 1e-12);
    CHECK(oracle_estimate(f, CVector(CVector::Zero(64))).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("oracle Monte Carlo MSE matches the analytic value") {
  SUBCASE("s51 triples, 10^4 draws, 0.1 dB") {
    auto config = profile_mixture(Profile::s51, 0.1);
    const auto bank = build_filter_bank(config.source, config.interference, config.kappa_levels,
                                        config.sigma, config.n);
    const int trials = 10000;
    for (std::size_t index : {std::size_t{0}, std::size_t{137}, std::size_t{274}}) {
      const auto& f = bank[index];
      RandomStream rng(900 + index);
      CMatrix y(config.n, trials), s(config.n, trials);
      for (int t = 0; t < trials; ++t) {
        s.col(t) = sample_source(config.source, f.triple.tau_s, config.n, rng);
        const CVector b = sample_source(config.interference, f.triple.tau_b, config.n, rng);
        CVector z(config.n);
        for (int i = 0; i < config.n; ++i) z(i) = rng.complex_normal();
        y.col(t) = s.col(t) + f.triple.kappa * b + config.sigma * z;
      }
      const double mc = (oracle_estimate(f, y) - s).squaredNorm() / (config.n * double(trials));
      const double db = 10.0 * std::log10(mc / oracle_mse_analytic(f));
      CAPTURE(index);
      CHECK(std::abs(db) <= 0.1);
    }
  }
  SUBCASE("N=6 toy, 10^6 draws, 3 standard errors") {
    const auto config = toy_config(6, 2, 2, {{1.0, 1.0}}, 0.3);
    const auto bank = build_filter_bank(config.source, config.interference, config.kappa_levels,
                                        config.sigma, 6);
    const auto& f = bank.at({1, 0, 1.0});
    RandomStream rng(31);
    const int trials = 1000000, block = 50000;
    double sum = 0.0, sum2 = 0.0;
    for (int done = 0; done < trials; done += block) {
      CMatrix y(6, block), s(6, block);
      for (int t = 0; t < block; ++t) {
        s.col(t) = sample_source(config.source, 1, 6, rng);
        const CVector b = sample_source(config.interference, 0, 6, rng);
        CVector z(6);
        for (int i = 0; i < 6; ++i) z(i) = rng.complex_normal();
        y.col(t) = s.col(t) + b + 0.3 * z;
      }
      const Eigen::VectorXd err = (oracle_estimate(f, y) - s).colwise().squaredNorm() / 6.0;
      sum += err.sum();
      sum2 += err.squaredNorm();
    }
    const double mean = sum / trials;
    const double se = std::sqrt((sum2 / trials - mean * mean) / (trials - 1));
    CHECK(std::abs(mean - oracle_mse_analytic(f)) <= 3.0 * se);
  }
}

TEST_CASE("posterior tables") {
  SUBCASE("single triple") {
    const auto config = toy_config(6, 1, 1, {{1.0, 1.0}}, 0.3);
    const auto bank = build_filter_bank(config.source, config.interference, config.kappa_levels,
                                        config.sigma, 6);
    REQUIRE(bank.size() == 1);
    RandomStream rng(12);
    for (int r = 0; r < 10; ++r) {
      const CVector y = random_matrix(6, 1, rng).col(0);
      CHECK(log_posterior(bank, y).log_posterior[0] == 0.0);
      const CVector a = mmse_estimate(bank, y);
      const CVector b = oracle_estimate(bank[0], y);
      CHECK((a.array() == b.array()).all());
    }
  }
  SUBCASE("normalization, batch agreement") {
    auto config = profile_mixture(Profile::s51, 0.5);
    config.n = 32;
    const auto bank = build_filter_bank(config.source, config.interference, config.kappa_levels,
                                        config.sigma, config.n);
    const auto records = make_dataset(config, 40, 5);
    CMatrix y(config.n, 40);
    for (int i = 0; i < 40; ++i) y.col(i) = records[i].y;
    const auto tables = log_posterior(bank, y);
    std::vector<MmseStats> stats;
    const CMatrix batch = mmse_estimate(bank, y, {}, &stats);
    for (int i = 0; i < 40; ++i) {
      const auto single = log_posterior(bank, CVector(y.col(i)));
      double total = 0.0;
      for (std::size_t t = 0; t < bank.size(); ++t) {
        CHECK(single.log_posterior[t] <= 0.0);
        CHECK(std::abs(single.log_posterior[t] - tables[i].log_posterior[t]) <= 1e-9);
        total += std::exp(single.log_posterior[t]);
      }
      CHECK(std::abs(total - 1.0) <= 1e-9);
      MmseStats one;
      const CVector est = mmse_estimate(bank, CVector(y.col(i)), {}, &one);
      CHECK(rel_error(CVector(batch.col(i)), est) <= 1e-12);
      CHECK(one.skipped_triples == stats[i].skipped_triples);
      CHECK(one.skipped_mass <= 1e-12 * static_cast<double>(bank.size()));
    }
  }
}

TEST_CASE("posterior concentrates on the true triple at high SIR and low noise") {
  auto config = profile_mixture(Profile::s51, 0.1);
  const auto bank = build_filter_bank(config.source, config.interference, config.kappa_levels,
                                      config.sigma, config.n);
  const std::size_t draws = 1000;
  const auto records = make_dataset(config, draws, 2024);
  CMatrix y(config.n, static_cast<Eigen::Index>(draws));
  for (std::size_t i = 0; i < draws; ++i) y.col(static_cast<Eigen::Index>(i)) = records[i].y;
  const auto tables = log_posterior(bank, y);
  double mass = 0.0;
  std::size_t delta_checked = 0;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto& lat = records[i].latents;
    const std::size_t t = *bank.find({lat.tau_s, lat.tau_b, lat.kappa});
    const double p = std::exp(tables[i].log_posterior[t]);
    mass += p;
    if (p >= 1.0 - 1e-9 && delta_checked < 50) {
      const CVector mmse = mmse_estimate(bank, records[i].y);
      const CVector oracle = oracle_estimate(bank[t], records[i].y);
      CHECK(rel_error(mmse, oracle) <= 1e-6);
      ++delta_checked;
    }
  }
  mass /= static_cast<double>(draws);
  MESSAGE("average true-triple mass = " << mass);
  CHECK(mass >= 0.99);
  CHECK(delta_checked == 50);
}

TEST_CASE("mmse matches exhaustive enumeration") {
  const auto config = toy_config(6, 2, 2, {{0.6, 0.4}, {1.5, 0.6}}, 0.3);
  const auto bank = build_filter_bank(config.source, config.interference, config.kappa_levels,
                                      config.sigma, 6);
  REQUIRE(bank.size() == 8);
  RandomStream rng(99);
  const auto records = make_dataset(config, 50, 17);
  double worst = 0.0;
  for (int r = 0; r < 100; ++r) {
    const CVector y = r < 50 ? records[r].y : CVector(random_matrix(6, 1, rng).col(0));
    worst = std::max(worst, rel_error(mmse_estimate(bank, y), brute_force_mmse(config, y)));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("a zero-prior level makes the posterior a delta over kappa") {
  const auto config = toy_config(6, 1, 1, {{0.5, 0.0}, {2.0, 1.0}}, 0.3);
  const auto bank = build_filter_bank(config.source, config.interference, config.kappa_levels,
                                      config.sigma, 6);
  RandomStream rng(6);
  const CVector y = random_matrix(6, 1, rng).col(0);
  MmseStats stats;
  const CVector est = mmse_estimate(bank, y, {}, &stats);
  CHECK(rel_error(est, oracle_estimate(bank.at({0, 0, 2.0}), y)) <= 1e-6);
  CHECK(stats.skipped_triples == 1);
  CHECK(stats.skipped_mass == 0.0);
}

TEST_CASE("filter bank file round trip") {
  auto config = profile_mixture(Profile::s51, 0.2);
  config.n = 24;
  const auto bank = build_filter_bank(config.source, config.interference, config.kappa_levels,
                                      config.sigma, config.n);
  const auto path = std::filesystem::temp_directory_path() / "scss_test_bank.csfb";
  write_filter_bank(bank, path);
  const auto back = read_filter_bank(path, config.source);
  REQUIRE(back.size() == bank.size());
  CHECK(back.sigma() == bank.sigma());
  for (std::size_t t = 0; t < bank.size(); ++t) {
    CHECK((back[t].factor.lower.array() == bank[t].factor.lower.array()).all());
    CHECK(back[t].factor.log_det == bank[t].factor.log_det);
    CHECK(back[t].log_prior == bank[t].log_prior);
    CHECK((back[t].source_cov->array() == bank[t].source_cov->array()).all());
  }
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
  CHECK_THROWS_AS(read_filter_bank(path, config.source), Error);
  std::filesystem::remove(path);
}
