#include "fedgru/experiment.h"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "fedgru/checkpoint.h"
#include "fedgru/errors.h"
#include "fedgru/results_io.h"
#include "fedgru/rng.h"

namespace fedgru::cli {

namespace {

long sweep_horizon(long batch_len) { return std::max(1L, std::lround(0.1 * static_cast<double>(batch_len))); }

// Cap on positions fed to node placement for large trace files.
constexpr std::size_t kPlacementSample = 20000;

}  // namespace

long slots_needed(const ExperimentConfig& config) {
  long need = federation::required_slots(config.train, config.fed);
  if (config.batch_sweep)
    for (long s : config.batch_sizes) need = std::max(need, s + config.fed.rounds + sweep_horizon(s));
  return need;
}

std::vector<traces::DelayReport> build_reports(const ExperimentConfig& config, long min_slots) {
  traces::SynthesisParams params;
  params.slot_len_s = config.data.mobility.slot_len_s;
  params.model = config.data.delay;
  params.seed = derive_rng(config.seed, {stream::kDelayNoise})();

  if (config.data.source == DataSource::synthetic) {
    auto mobility = config.data.mobility;
    mobility.slots = std::max(mobility.slots, min_slots);
    mobility.seed = derive_rng(config.seed, {stream::kMobility})();
    const auto grid = traces::area_grid(mobility.origin, mobility.area_km, 20);
    const auto nodes = traces::place_edge_nodes(grid, config.fed.num_local);
    return traces::synthesize_delays(mobility, nodes, params);
  }

  const auto parsed = traces::parse_trace_csv(config.data.trace_file);
  std::vector<traces::GeoPoint> sample;
  const std::size_t stride = std::max<std::size_t>(1, parsed.points.size() / kPlacementSample);
  for (std::size_t i = 0; i < parsed.points.size(); i += stride)
    sample.push_back({parsed.points[i].lat, parsed.points[i].lon});
  if (sample.size() < config.fed.num_local)
    throw DataError("trace has fewer distinct fixes than local nodes");
  const auto nodes = traces::place_edge_nodes(sample, config.fed.num_local);
  return traces::synthesize_delays(parsed.points, nodes, params);
}

FractionRun run_fraction(const ExperimentConfig& config,
                         std::span<const traces::DelayReport> clean,
                         std::size_t index) {
  FractionRun run;
  run.index = index;
  run.fraction = config.fractions.at(index);

  auto attack_cfg = config.attack;
  attack_cfg.fraction = run.fraction;
  attack_cfg.start_slot = config.onset_slot();
  attack_cfg.seed = derive_rng(config.seed, {stream::kAttackSelect, index})();

  run.vehicles = attack::distinct_vehicles(clean);
  run.assignment = attack::select_compromised(run.vehicles, attack_cfg);
  auto poisoned = attack::poison_reports(clean, run.assignment, attack_cfg);
  run.poisoned_reports = poisoned.poisoned_count;
  if (poisoned.valid_min_above_all)
    std::cerr << "warning: valid_min_ms exceeds every true delay of the compromised vehicles; forged values pinned at "
              << attack_cfg.valid_min_ms << " ms\n";

  metrics::GroundTruth truth;
  for (const auto& v : run.vehicles) truth[v] = run.assignment.contains(v);

  federation::RoundInputs inputs;
  inputs.reports = poisoned.reports;
  inputs.truth = &truth;
  inputs.train = config.train;
  inputs.detect = config.detect;
  inputs.fed = config.fed;
  inputs.seed = derive_rng(config.seed, {stream::kLocalTrain, index})();
  inputs.initial_ms = config.data.delay.base_ms;
  inputs.evaluate_local_models = config.evaluate_local_models;
  inputs.execution = config.execution;
  const auto ckpt_dir = config.out_dir / "checkpoints";
  inputs.on_round = [&](const federation::GlobalState& state, const federation::RoundLog& log) {
    for (int id : log.skipped_nodes)
      std::cerr << "warning: fraction " << run.fraction << " round " << log.round << ": node " << id
                << " has no reports in its window and was left out of the average\n";
    if (config.save_checkpoints) {
      std::filesystem::create_directories(ckpt_dir);
      grunet::save_checkpoint(ckpt_dir / ("global_f" + std::to_string(index) + "_r" + std::to_string(log.round) + ".json"),
                              state.global);
    }
  };
  run.state = federation::run_continual(inputs, config.shape);
  return run;
}

std::vector<BatchPoint> run_batch_sweep(const ExperimentConfig& config, std::span<const traces::DelayReport> clean) {
  std::vector<BatchPoint> points;
  for (long s : config.batch_sizes) {
    auto cfg = config;
    cfg.train.batch_len = s;
    cfg.train.horizon = sweep_horizon(s);
    cfg.detect.horizon = cfg.train.horizon;
    cfg.evaluate_local_models = false;
    cfg.validate();
    const auto run = run_fraction(cfg, clean, 0);
    BatchPoint p{s, cfg.train.horizon, run.fraction, {}};
    for (const auto& log : run.state.history) p.train_loss.push_back(log.train_loss);
    points.push_back(std::move(p));
  }
  return points;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto clean = build_reports(config, slots_needed(config));

  ExperimentResult result;
  for (std::size_t i = 0; i < config.fractions.size(); ++i) result.runs.push_back(run_fraction(config, clean, i));
  if (config.batch_sweep) result.batch = run_batch_sweep(config, clean);

  const auto& dir = config.out_dir;
  std::filesystem::create_directories(dir);
  write_round_logs(dir / kRoundsFile, result.runs);
  write_metrics_table(dir / kMetricsFile, result.runs);
  for (const auto& run : result.runs) write_verdicts(dir / verdicts_file(run.index), run);
  emit_plot_data(result.runs, dir);
  if (config.batch_sweep) write_batch_sweep(dir / kBatchSweepFile, result.batch);
  write_summary(dir / kSummaryFile, config, result);
  return result;
}

}  // namespace fedgru::cli
