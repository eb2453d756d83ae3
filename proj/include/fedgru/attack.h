#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fedgru/traces.h"

namespace fedgru::attack {

struct AttackConfig {
  double fraction = 0.0;      // share of vehicles whose identities are hijacked
  double valid_min_ms = 1.0;  // lowest plausible delay
  double margin_ms = 25.0;    // forged values sit at least this far below the truth
  long start_slot = 0;        // reports before this slot are left untouched
  std::uint64_t seed = 0;

  void validate() const;
};

struct SybilAssignment {
  std::set<std::string> compromised;

  bool contains(const std::string& vehicle) const { return compromised.count(vehicle) != 0; }
};

// Uniform subset of size round(fraction * n) of the distinct ids.
SybilAssignment select_compromised(std::span<const std::string> vehicles, const AttackConfig& config);

struct PoisonResult {
  std::vector<traces::DelayReport> reports;
  std::size_t poisoned_count = 0;
  std::size_t pinned_count = 0;  // true delay below valid_min + margin, forged value pinned at valid_min
  bool valid_min_above_all = false;  // valid_min exceeds every true delay of compromised vehicles
};

// Replaces each compromised report at or after start_slot with a draw from
// U[valid_min, max(valid_min, true - margin)] and marks it poisoned. Other
// reports are copied unchanged.
PoisonResult poison_reports(std::span<const traces::DelayReport> reports,
                            const SybilAssignment& assignment,
                            const AttackConfig& config);

std::vector<std::string> distinct_vehicles(std::span<const traces::DelayReport> reports);

}  // namespace fedgru::attack
