#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedgru/attack.h"
#include "fedgru/detector.h"
#include "fedgru/execution.h"
#include "fedgru/federation.h"
#include "fedgru/gru.h"
#include "fedgru/traces.h"
#include "fedgru/trainer.h"

namespace fedgru::cli {

enum class DataSource { synthetic, trace };

struct DataConfig {
  DataSource source = DataSource::synthetic;
  std::filesystem::path trace_file;
  traces::MobilityConfig mobility;  // synthetic only; slots 0 means "just enough"
  traces::DelayModel delay;
};

struct ExperimentConfig {
  DataConfig data;
  federation::FederationConfig fed;
  grunet::TrainConfig train;
  grunet::ModelShape shape;
  attack::AttackConfig attack;       // fraction and seed are set per sweep point
  long attack_onset = -1;            // -1: attack starts right after the first training window
  std::vector<double> fractions{0.1, 0.2, 0.3, 0.4, 0.5};
  detector::DetectionConfig detect;
  std::vector<long> batch_sizes{100, 150, 200, 250, 300};
  bool batch_sweep = false;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "results";
  Execution execution = Execution::parallel;
  bool evaluate_local_models = true;
  bool save_checkpoints = false;

  long onset_slot() const { return attack_onset < 0 ? train.batch_len : attack_onset; }

  // Throws ConfigError on the first invalid field.
  void validate() const;
};

// Key-value text with [sections]; see configs/default.ini for every key.
// Missing keys keep their defaults; unknown keys and bad values throw
// ConfigError naming the key.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

// Comma separated list of fractions, each in [0,1].
std::vector<double> parse_fraction_list(const std::string& text);

}  // namespace fedgru::cli
