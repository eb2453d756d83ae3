// fedgru: run federated GRU delay-forecasting experiments with Sybil
// data-poisoning injection and write the result files.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fedgru/config.h"
#include "fedgru/errors.h"
#include "fedgru/experiment.h"
#include "fedgru/metrics.h"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

std::uint64_t parse_seed(const std::string& text, const char* origin) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw fedgru::ConfigError(std::string("invalid seed '") + text + "' from " + origin);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated GRU delay forecasting with Sybil poisoning detection"};
  app.require_subcommand(1);

  std::string config_path;
  std::string fractions;
  std::string out_dir;
  std::optional<std::string> seed;
  bool batch_sweep = false;
  bool serial = false;
  bool quiet = false;

  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("--config", config_path, "Config file (INI-style sections)")->required();
  run->add_option("--sweep-fractions", fractions, "Attacked fractions, comma separated");
  run->add_flag("--batch-sweep", batch_sweep, "Also run the batch-size sweep");
  run->add_option("--out", out_dir, "Output directory (env FEDGRU_OUT)");
  run->add_option("--seed", seed, "Master seed (env FEDGRU_SEED)");
  run->add_flag("--serial", serial, "Single-threaded reference execution");
  run->add_flag("-q,--quiet", quiet, "Do not print the per-fraction summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  fedgru::cli::ExperimentConfig config;
  try {
    config = fedgru::cli::load_config(config_path);
    if (auto s = env("FEDGRU_SEED")) config.seed = parse_seed(*s, "FEDGRU_SEED");
    if (auto o = env("FEDGRU_OUT")) config.out_dir = *o;
    if (seed) config.seed = parse_seed(*seed, "--seed");
    if (!out_dir.empty()) config.out_dir = out_dir;
    if (!fractions.empty()) config.fractions = fedgru::cli::parse_fraction_list(fractions);
    if (batch_sweep) config.batch_sweep = true;
    if (serial) config.execution = fedgru::Execution::serial;
    config.validate();
  } catch (const fedgru::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    const auto result = fedgru::cli::run_experiment(config);
    if (!quiet) {
      for (const auto& r : result.runs) {
        fedgru::metrics::ConfusionCounts c;
        for (const auto& log : r.state.history) c += log.counts;
        std::cout << "fraction " << r.fraction << ": TP=" << c.tp << " TN=" << c.tn << " FP=" << c.fp << " FN=" << c.fn;
        if (c.total() > 0) std::cout << " ACC=" << fedgru::metrics::accuracy(c);
        std::cout << '\n';
      }
      std::cout << "results written to " << config.out_dir.string() << '\n';
    }
  } catch (const fedgru::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
