#include "fedgru/detector.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "fedgru/errors.h"

namespace fedgru::detector {

void DetectionConfig::validate() const {
  if (!(threshold_ms > 0.0)) throw ConfigError("threshold_ms must be positive");
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
}

bool detect_slot(double predicted_ms, double received_ms, double threshold_ms) {
  return std::abs(predicted_ms - received_ms) > threshold_ms;
}

std::optional<Verdict> detect_vehicle(const std::string& vehicle_id,
                                      std::span<const PairedDelay> pairs,
                                      const DetectionConfig& config,
                                      int round) {
  if (pairs.empty()) return std::nullopt;
  double sum = 0.0;
  std::size_t exceed = 0;
  for (const auto& p : pairs) {
    sum += std::abs(p.predicted_ms - p.received_ms);
    if (detect_slot(p.predicted_ms, p.received_ms, config.threshold_ms)) ++exceed;
  }
  Verdict v;
  v.vehicle_id = vehicle_id;
  v.round = round;
  v.slots = pairs.size();
  v.mean_abs_diff = sum / static_cast<double>(pairs.size());
  switch (config.rule) {
    case VerdictRule::mean:
      v.flagged = v.mean_abs_diff > config.threshold_ms;
      break;
    case VerdictRule::any_slot:
      v.flagged = exceed > 0;
      break;
    case VerdictRule::majority:
      v.flagged = 2 * exceed > pairs.size();
      break;
  }
  return v;
}

std::vector<Verdict> detect_all(std::span<const NodeForecast> forecasts,
                                std::span<const traces::DelayReport> reports,
                                const DetectionConfig& config,
                                int round,
                                Execution execution) {
  std::map<int, const NodeForecast*> by_node;
  for (const auto& f : forecasts) by_node[f.node_id] = &f;

  std::map<std::string, std::vector<PairedDelay>> pairs;
  for (const auto& r : reports) {
    auto it = by_node.find(r.node_id);
    if (it == by_node.end()) continue;
    const auto& f = *it->second;
    const long k = r.slot - f.first_slot;
    if (k < 0 || k >= static_cast<long>(f.predicted_ms.size())) continue;
    pairs[r.vehicle_id].push_back({r.slot, f.predicted_ms[static_cast<std::size_t>(k)], r.delay_ms});
  }

  std::vector<const std::pair<const std::string, std::vector<PairedDelay>>*> items;
  items.reserve(pairs.size());
  for (auto& kv : pairs) {
    // Sum in slot order so the verdict does not depend on report order.
    std::sort(kv.second.begin(), kv.second.end(),
              [](const PairedDelay& a, const PairedDelay& b) { return a.slot < b.slot; });
    items.push_back(&kv);
  }

  std::vector<std::optional<Verdict>> slots(items.size());
  const auto n = static_cast<long>(items.size());
  if (execution == Execution::parallel) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i)
      slots[static_cast<std::size_t>(i)] =
          detect_vehicle(items[static_cast<std::size_t>(i)]->first, items[static_cast<std::size_t>(i)]->second, config, round);
  } else {
    for (long i = 0; i < n; ++i)
      slots[static_cast<std::size_t>(i)] =
          detect_vehicle(items[static_cast<std::size_t>(i)]->first, items[static_cast<std::size_t>(i)]->second, config, round);
  }

  std::vector<Verdict> out;
  out.reserve(slots.size());
  for (auto& v : slots)
    if (v) out.push_back(std::move(*v));
  return out;
}

const char* to_string(VerdictRule rule) {
  switch (rule) {
    case VerdictRule::mean: return "mean";
    case VerdictRule::any_slot: return "any_slot";
    case VerdictRule::majority: return "majority";
  }
  return "mean";
}

VerdictRule verdict_rule_from_string(const std::string& s) {
  if (s == "mean") return VerdictRule::mean;
  if (s == "any_slot") return VerdictRule::any_slot;
  if (s == "majority") return VerdictRule::majority;
  throw ConfigError("verdict rule must be one of mean, any_slot, majority (got '" + s + "')");
}

}  // namespace fedgru::detector
