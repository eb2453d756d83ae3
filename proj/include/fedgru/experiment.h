#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fedgru/attack.h"
#include "fedgru/config.h"
#include "fedgru/federation.h"
#include "fedgru/metrics.h"

namespace fedgru::cli {

// Outcome of one attacked-fraction sweep point.
struct FractionRun {
  double fraction = 0.0;
  std::size_t index = 0;
  std::vector<std::string> vehicles;
  attack::SybilAssignment assignment;
  std::size_t poisoned_reports = 0;
  federation::GlobalState state;
};

struct BatchPoint {
  long batch_len = 0;
  long horizon = 0;
  double fraction = 0.0;
  std::vector<metrics::LossAggregate> train_loss;  // one per round
};

struct ExperimentResult {
  std::vector<FractionRun> runs;
  std::vector<BatchPoint> batch;
};

// Clean delay reports for the whole experiment, covering at least
// `min_slots` slots. Built once and shared by every sweep point.
std::vector<traces::DelayReport> build_reports(const ExperimentConfig& config, long min_slots);

// Slots needed by the configured runs, batch sweep included.
long slots_needed(const ExperimentConfig& config);

// Attack injection, continual rounds and scoring for fractions[index].
FractionRun run_fraction(const ExperimentConfig& config,
                         std::span<const traces::DelayReport> clean,
                         std::size_t index);

// One continual run per batch size with horizon = batch/10, at the first
// sweep fraction.
std::vector<BatchPoint> run_batch_sweep(const ExperimentConfig& config, std::span<const traces::DelayReport> clean);

// Runs every sweep point (and the batch sweep when enabled) and writes the
// result files into config.out_dir.
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace fedgru::cli
