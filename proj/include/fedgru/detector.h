#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedgru/execution.h"
#include "fedgru/traces.h"

namespace fedgru::detector {

// How per-slot deviations over the horizon collapse to one verdict.
enum class VerdictRule {
  mean,      // mean |pred - rcv| > threshold
  any_slot,  // some slot exceeds the threshold
  majority,  // more than half of the slots exceed the threshold
};

struct DetectionConfig {
  double threshold_ms = 10.0;
  long horizon = 20;
  VerdictRule rule = VerdictRule::mean;

  void validate() const;
};

struct Verdict {
  std::string vehicle_id;
  int round = 0;
  bool flagged = false;
  double mean_abs_diff = 0.0;  // ms
  std::size_t slots = 0;       // compared slots

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

struct PairedDelay {
  long slot = 0;
  double predicted_ms = 0.0;
  double received_ms = 0.0;
};

// 1 when |pred - rcv| strictly exceeds the threshold.
bool detect_slot(double predicted_ms, double received_ms, double threshold_ms);

// Verdict for one vehicle from its predicted/received pairs; nullopt when
// there is nothing to compare.
std::optional<Verdict> detect_vehicle(const std::string& vehicle_id,
                                      std::span<const PairedDelay> pairs,
                                      const DetectionConfig& config,
                                      int round);

// Denormalized forecast of one node for slots [first_slot, first_slot + size).
struct NodeForecast {
  int node_id = 0;
  long first_slot = 0;
  std::vector<double> predicted_ms;
};

// Pairs every report that falls inside its node's forecast with the forecast
// value and issues one verdict per vehicle, ordered by vehicle id.
std::vector<Verdict> detect_all(std::span<const NodeForecast> forecasts,
                                std::span<const traces::DelayReport> reports,
                                const DetectionConfig& config,
                                int round,
                                Execution execution = Execution::parallel);

const char* to_string(VerdictRule rule);
VerdictRule verdict_rule_from_string(const std::string& s);

}  // namespace fedgru::detector
