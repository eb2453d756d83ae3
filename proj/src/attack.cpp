#include "fedgru/attack.h"

#include <algorithm>
#include <cmath>

#include "fedgru/errors.h"
#include "fedgru/rng.h"

namespace fedgru::attack {

void AttackConfig::validate() const {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("fraction must lie in [0,1]");
  if (!(valid_min_ms >= 0.0)) throw ConfigError("valid_min_ms must be non-negative");
  if (!(margin_ms >= 0.0)) throw ConfigError("margin_ms must be non-negative");
  if (start_slot < 0) throw ConfigError("start_slot must be non-negative");
}

SybilAssignment select_compromised(std::span<const std::string> vehicles, const AttackConfig& config) {
  config.validate();
  std::vector<std::string> ids(vehicles.begin(), vehicles.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  const auto count = static_cast<std::size_t>(std::llround(config.fraction * static_cast<double>(ids.size())));
  auto rng = derive_rng(config.seed, {stream::kAttackSelect});
  std::shuffle(ids.begin(), ids.end(), rng);

  SybilAssignment out;
  out.compromised.insert(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(std::min(count, ids.size())));
  return out;
}

PoisonResult poison_reports(std::span<const traces::DelayReport> reports,
                            const SybilAssignment& assignment,
                            const AttackConfig& config) {
  config.validate();
  PoisonResult out;
  out.reports.assign(reports.begin(), reports.end());
  auto rng = derive_rng(config.seed, {stream::kAttackPoison});

  bool any_true_at_or_above_min = false;
  for (auto& r : out.reports) {
    if (r.slot < config.start_slot || !assignment.contains(r.vehicle_id)) continue;
    const double truth = r.delay_ms;
    if (truth >= config.valid_min_ms) any_true_at_or_above_min = true;
    const double upper = std::max(config.valid_min_ms, truth - config.margin_ms);
    if (upper <= config.valid_min_ms) ++out.pinned_count;
    r.delay_ms = uniform(rng, config.valid_min_ms, upper);
    r.poisoned = true;
    ++out.poisoned_count;
  }
  out.valid_min_above_all = out.poisoned_count > 0 && !any_true_at_or_above_min;
  return out;
}

std::vector<std::string> distinct_vehicles(std::span<const traces::DelayReport> reports) {
  std::vector<std::string> ids;
  ids.reserve(reports.size());
  for (const auto& r : reports) ids.push_back(r.vehicle_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace fedgru::attack
