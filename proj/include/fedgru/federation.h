#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fedgru/detector.h"
#include "fedgru/execution.h"
#include "fedgru/gru.h"
#include "fedgru/metrics.h"
#include "fedgru/traces.h"
#include "fedgru/trainer.h"

namespace fedgru::federation {

inline constexpr int kGlobalNode = 0;

struct FederationConfig {
  std::size_t num_local = 5;     // K
  int rounds = 10;               // R
  std::size_t cluster_size = 6;  // E = K + 1
  std::vector<double> weights;   // k_i per local node; empty means all 1

  void validate() const;
  double weight(std::size_t local_index) const;
};

struct Window {
  long start = 0;
  long length = 0;

  long end() const { return start + length; }
  friend bool operator==(const Window&, const Window&) = default;
};

// Advances the window by one slot.
Window slide_window(Window w);

// Weighted element-wise average: sum(k_i * w_i) / n over the given vectors.
// Throws StructuralError when lengths differ or nothing is given.
std::vector<double> fed_average(std::span<const std::span<const double>> locals,
                                std::span<const double> weights,
                                Execution execution = Execution::parallel);

// Element-by-element reference for the kernel above.
std::vector<double> fed_average_serial(std::span<const std::span<const double>> locals,
                                       std::span<const double> weights);

// Same over full models; all layouts must match.
grunet::ModelParams fed_average(std::span<const grunet::ModelParams> locals,
                                std::span<const double> weights,
                                Execution execution = Execution::parallel);

struct LocalNodeState {
  int node_id = 0;
  Window window;
  grunet::ModelParams params;
  traces::NormStats stats;
  std::vector<double> normalized_window;
  std::vector<double> loss_trace;
  bool skipped = false;
};

// Initializes the node from the global parameters, builds its window series
// from `node_reports`, refits normalization on it and trains. A node without
// any report inside its window is marked skipped and keeps the global
// parameters. Returns false when skipped.
bool local_update(LocalNodeState& node,
                  const grunet::ModelParams& global,
                  std::span<const traces::DelayReport> node_reports,
                  const grunet::TrainConfig& config,
                  double initial_ms = 20.0);

struct NodeRoundRecord {
  int node_id = 0;
  double train_loss = 0.0;         // last-epoch loss of the local model
  double global_fit_loss = 0.0;    // global model, eval mode, on this node's window
  double heldout_local = 0.0;      // this node's local model on every node's horizon (mean)
  double heldout_global = 0.0;     // global model on this node's horizon
  double mdd_ms = 0.0;             // mean |forecast - representative| over the horizon
  traces::NormStats stats;
  std::vector<double> predicted_ms;
  std::vector<double> received_ms;  // per-slot representative over the horizon
};

struct RoundLog {
  int round = 0;
  Window window;
  long horizon_start = 0;
  std::vector<NodeRoundRecord> nodes;  // participating nodes only
  std::vector<int> skipped_nodes;       // nodes with no report inside their window
  std::vector<detector::Verdict> verdicts;
  metrics::ConfusionCounts counts;
  metrics::LossAggregate train_loss;  // over participating local nodes
  double global_loss = 0.0;           // mean of global_fit_loss over participating nodes
  double heldout_global = 0.0;        // mean over participating nodes
  double mdd_ms = 0.0;                // mean over participating nodes
};

struct GlobalState {
  grunet::ModelParams global;
  int round = 0;
  std::vector<RoundLog> history;
};

// Everything a round needs besides the mutable states.
struct RoundInputs {
  std::span<const traces::DelayReport> reports;
  const metrics::GroundTruth* truth = nullptr;  // scoring only; may be null
  grunet::TrainConfig train;
  detector::DetectionConfig detect;
  FederationConfig fed;
  std::uint64_t seed = 0;
  double initial_ms = 20.0;
  bool evaluate_local_models = true;
  Execution execution = Execution::parallel;
  // Called by run_continual after each committed round.
  std::function<void(const GlobalState&, const RoundLog&)> on_round;
};

// Local updates, averaging, global forecast per node, detection and scoring
// for one round, then every window slides. On any node failure the round is
// abandoned and neither `global` nor `nodes` change.
RoundLog run_round(GlobalState& global, std::vector<LocalNodeState>& nodes, const RoundInputs& inputs);

std::vector<LocalNodeState> make_local_nodes(const FederationConfig& fed, long batch_len, long first_slot = 0);

// Number of slots the reports must cover: S + R + t'.
long required_slots(const grunet::TrainConfig& train, const FederationConfig& fed);

// R rounds from a freshly initialized global model. Throws ConfigError when
// the reports cover fewer than required_slots().
GlobalState run_continual(const RoundInputs& inputs, const grunet::ModelShape& shape);

}  // namespace fedgru::federation
