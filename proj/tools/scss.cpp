// Command-line front end: generate, covariance, benchmark, export-dataset.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "scss/benchmark.hpp"
#include "scss/dataset_io.hpp"
#include "scss/error.hpp"
#include "scss/matrix_io.hpp"
#include "scss/mixture.hpp"
#include "scss/profiles.hpp"

namespace fs = std::filesystem;
using namespace scss;

namespace {

struct MixtureOptions {
  std::string config;
  std::string profile;
  std::optional<double> sigma;
};

void add_mixture_options(CLI::App* cmd, MixtureOptions& opts) {
  cmd->add_option("--config", opts.config, "Mixture config file (JSON)");
  cmd->add_option("--profile", opts.profile, "Built-in profile: s51, s52, s52-reduced");
  cmd->add_option("--sigma", opts.sigma, "Noise standard deviation (overrides the config)");
}

MixtureConfig resolve_mixture(const MixtureOptions& opts) {
  if (!opts.config.empty() && !opts.profile.empty())
    throw Error(ErrorKind::invalid_argument, "--config and --profile are mutually exclusive");
  if (!opts.config.empty()) {
    MixtureConfig config = load_mixture(opts.config);
    if (opts.sigma) {
      config.sigma = *opts.sigma;
      config.validate();
    }
    return config;
  }
  if (opts.profile.empty())
    throw Error(ErrorKind::invalid_argument, "one of --config or --profile is required");
  const auto profile = parse_profile(opts.profile);
  if (!profile) throw Error(ErrorKind::invalid_argument, "unknown profile '" + opts.profile + "'");
  if (!opts.sigma)
    throw Error(ErrorKind::invalid_argument, "--sigma is required with --profile");
  return profile_mixture(*profile, *opts.sigma);
}

void report(ErrorKind kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", to_string(kind)}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cyclostationary source separation: simulation, estimators, benchmark"};
  app.require_subcommand(1);

  MixtureOptions mix_opts;
  std::uint64_t seed = 0;
  std::string out;

  // generate
  std::size_t generate_count = 1000;
  auto* generate = app.add_subcommand("generate", "Write model configs and an evaluation dataset");
  add_mixture_options(generate, mix_opts);
  generate->add_option("--seed", seed, "Dataset seed");
  generate->add_option("--count", generate_count, "Number of records");
  generate->add_option("--out", out, "Output directory")->required();

  // covariance
  std::string which = "source";
  std::optional<int> tau;
  auto* covariance = app.add_subcommand("covariance", "Dump an analytic covariance (CSCV binary)");
  add_mixture_options(covariance, mix_opts);
  covariance->add_option("--which", which, "source or interference")
      ->check(CLI::IsMember({"source", "interference"}));
  covariance->add_option("--tau", tau, "Offset for the conditional covariance; marginal if omitted");
  covariance->add_option("--out", out, "Output file")->required();

  // benchmark
  int trials = 1000;
  std::string estimators = "lmmse,lmmse_known_kappa,oracle,mmse";
  std::string format = "csv";
  double memory_budget_gib = static_cast<double>(kDefaultMemoryBudget) / (1u << 30);
  auto* bench = app.add_subcommand("benchmark", "Sweep SIR levels and emit MSE curves");
  add_mixture_options(bench, mix_opts);
  bench->add_option("--trials", trials, "Trials per SIR level");
  bench->add_option("--seed", seed, "Benchmark seed");
  bench->add_option("--estimators", estimators, "Comma-separated estimator list");
  bench->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  bench->add_option("--memory-budget-gib", memory_budget_gib, "Filter bank memory budget");
  bench->add_option("--out", out, "Output file")->required();

  // export-dataset
  std::string split = "train";
  std::size_t export_count = 1000;
  auto* exporter = app.add_subcommand("export-dataset", "Export a labeled (y, s) dataset");
  add_mixture_options(exporter, mix_opts);
  exporter->add_option("--split", split, "train, val or test (test keeps latents)")
      ->check(CLI::IsMember({"train", "val", "test"}));
  exporter->add_option("--count", export_count, "Number of records");
  exporter->add_option("--seed", seed, "Dataset seed");
  exporter->add_option("--out", out, "Output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report(ErrorKind::invalid_argument, e.what());
    return 2;
  }

  try {
    const MixtureConfig mix = resolve_mixture(mix_opts);

    if (generate->parsed()) {
      fs::create_directories(out);
      save_model(mix.source, fs::path(out) / "source.json");
      save_model(mix.interference, fs::path(out) / "interference.json");
      save_mixture(mix, fs::path(out) / "mixture.json");
      const auto records = make_dataset(mix, generate_count, seed);
      export_dataset(records, fs::path(out) / "dataset.csds", true,
                     dataset_metadata(mix, seed, "test"), static_cast<std::uint32_t>(mix.n));
    } else if (covariance->parsed()) {
      const SourceModel& model = which == "source" ? mix.source : mix.interference;
      const CMatrix matrix = tau ? conditional_covariance(model, *tau, mix.n).matrix
                                 : marginal_covariance(model, mix.n).matrix;
      write_covariance(matrix, out);
    } else if (bench->parsed()) {
      BenchmarkConfig config{.mixture = mix};
      config.trials = trials;
      config.seed = seed;
      config.estimators = parse_estimator_list(estimators);
      config.bank_options.memory_budget_bytes =
          static_cast<std::size_t>(memory_budget_gib * static_cast<double>(1u << 30));
      const CurveTable table = run_benchmark(config);
      for (const auto& notice : table.metadata.notices) std::cerr << "notice: " << notice << '\n';
      emit_curves(table, out, *parse_curve_format(format));
    } else if (exporter->parsed()) {
      const auto records = make_dataset(mix, export_count, seed);
      export_dataset(records, out, split == "test", dataset_metadata(mix, seed, split),
                     static_cast<std::uint32_t>(mix.n));
    }
  } catch (const Error& e) {
    report(e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    report(ErrorKind::internal, e.what());
    return 1;
  }
  return 0;
}
