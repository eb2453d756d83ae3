#include <doctest.h>

#include <cstring>
#include <map>

#include "fedgru/attack.h"
#include "fedgru/errors.h"

using namespace fedgru;
using namespace fedgru::attack;

namespace {

std::vector<std::string> ids(int n) {
  std::vector<std::string> v;
  for (int i = 0; i < n; ++i) v.push_back("veh" + std::to_string(i));
  return v;
}

std::vector<traces::DelayReport> reports(int vehicles, int slots, double base) {
  std::vector<traces::DelayReport> out;
  for (int s = 0; s < slots; ++s)
    for (int v = 0; v < vehicles; ++v) {
      traces::DelayReport r;
      r.vehicle_id = "veh" + std::to_string(v);
      r.slot = s;
      r.node_id = 1 + v % 3;
      r.delay_ms = base + v + 0.25 * s;
      out.push_back(r);
    }
  return out;
}

bool same_report(const traces::DelayReport& a, const traces::DelayReport& b) {
  return a.vehicle_id == b.vehicle_id && a.slot == b.slot && a.node_id == b.node_id && a.poisoned == b.poisoned &&
         std::memcmp(&a.delay_ms, &b.delay_ms, sizeof(double)) == 0;
}

}  // namespace

TEST_SUITE("attack") {

TEST_CASE("select_compromised sizes") {
  AttackConfig c;
  c.seed = 3;
  c.fraction = 0.2;
  CHECK(select_compromised(ids(10), c).compromised.size() == 2);
  c.fraction = 0.0;
  CHECK(select_compromised(ids(10), c).compromised.empty());
  c.fraction = 1.0;
  CHECK(select_compromised(ids(10), c).compromised.size() == 10);
  c.fraction = 0.25;
  CHECK(select_compromised(ids(10), c).compromised.size() == 3);  // round(2.5) away from zero
  c.fraction = 0.1;
  CHECK(select_compromised(ids(100), c).compromised.size() == 10);
}

TEST_CASE("select_compromised is seeded, a subset, and ignores duplicates") {
  AttackConfig c;
  c.fraction = 0.3;
  c.seed = 8;
  auto v = ids(20);
  const auto a = select_compromised(v, c);
  CHECK(a.compromised == select_compromised(v, c).compromised);
  for (const auto& id : a.compromised) CHECK(std::find(v.begin(), v.end(), id) != v.end());
  auto dup = v;
  dup.insert(dup.end(), v.begin(), v.end());
  CHECK(select_compromised(dup, c).compromised == a.compromised);
  c.seed = 9;
  CHECK(select_compromised(v, c).compromised != a.compromised);
}

TEST_CASE("select_compromised is roughly uniform") {
  std::map<std::string, int> hits;
  AttackConfig c;
  c.fraction = 0.2;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    c.seed = s;
    for (const auto& id : select_compromised(ids(10), c).compromised) ++hits[id];
  }
  for (const auto& [id, n] : hits) CHECK(std::abs(n - 400) < 80);
}

TEST_CASE("AttackConfig validation") {
  AttackConfig c;
  c.fraction = 1.5;
  CHECK_THROWS_WITH_AS(c.validate(), "fraction must lie in [0,1]", ConfigError);
  c.fraction = -0.1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = AttackConfig{};
  c.margin_ms = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = AttackConfig{};
  c.valid_min_ms = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("poison_reports: no adversary leaves reports untouched") {
  const auto in = reports(8, 5, 40);
  AttackConfig c;
  const auto out = poison_reports(in, select_compromised(distinct_vehicles(in), c), c);
  REQUIRE(out.reports.size() == in.size());
  for (std::size_t i = 0; i < in.size(); ++i) CHECK(same_report(in[i], out.reports[i]));
  CHECK(out.poisoned_count == 0);
}

TEST_CASE("poison_reports range rule") {
  traces::DelayReport r;
  r.vehicle_id = "x";
  r.delay_ms = 60.0;
  AttackConfig c;
  c.valid_min_ms = 5;
  SybilAssignment a{{"x"}};
  for (double margin : {0.0, 10.0, 25.0, 50.0}) {
    c.margin_ms = margin;
    double lo = 1e9, hi = -1e9;
    for (std::uint64_t s = 0; s < 400; ++s) {
      c.seed = s;
      const auto out = poison_reports(std::vector<traces::DelayReport>{r}, a, c);
      const double v = out.reports[0].delay_ms;
      CHECK(v >= 5.0);
      CHECK(v <= 60.0 - margin);
      CHECK(out.reports[0].poisoned);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    // The draw spreads over the whole allowed range.
    CHECK(lo < 5.0 + 0.05 * (55.0 - margin));
    CHECK(hi > 60.0 - margin - 0.05 * (55.0 - margin));
  }
}

TEST_CASE("poison_reports invariants") {
  const auto in = reports(30, 12, 28);
  AttackConfig c;
  c.fraction = 0.4;
  c.seed = 21;
  const auto a = select_compromised(distinct_vehicles(in), c);
  const auto out = poison_reports(in, a, c);
  std::size_t expected = 0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const auto& o = out.reports[i];
    if (a.contains(in[i].vehicle_id)) {
      ++expected;
      CHECK(o.poisoned);
      CHECK(o.delay_ms <= in[i].delay_ms);
      CHECK(o.delay_ms >= c.valid_min_ms);
    } else {
      CHECK(same_report(in[i], o));
    }
  }
  CHECK(out.poisoned_count == expected);
  std::size_t flagged = 0;
  for (const auto& o : out.reports) flagged += o.poisoned ? 1 : 0;
  CHECK(flagged == expected);

  const auto again = poison_reports(in, a, c);
  for (std::size_t i = 0; i < in.size(); ++i) CHECK(same_report(again.reports[i], out.reports[i]));
}

TEST_CASE("poison_reports honours the attack onset") {
  const auto in = reports(10, 10, 40);
  AttackConfig c;
  c.fraction = 0.5;
  c.start_slot = 6;
  const auto a = select_compromised(distinct_vehicles(in), c);
  const auto out = poison_reports(in, a, c);
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i].slot < 6) CHECK(same_report(in[i], out.reports[i]));
    else CHECK(out.reports[i].poisoned == a.contains(in[i].vehicle_id));
  }
}

TEST_CASE("valid_min above every true delay pins the forged values") {
  const auto in = reports(4, 3, 2.0);
  AttackConfig c;
  c.fraction = 1.0;
  c.valid_min_ms = 100.0;
  const auto out = poison_reports(in, select_compromised(distinct_vehicles(in), c), c);
  CHECK(out.valid_min_above_all);
  CHECK(out.pinned_count == in.size());
  for (const auto& r : out.reports) CHECK(r.delay_ms == 100.0);
}

TEST_CASE("distinct_vehicles") {
  const auto v = distinct_vehicles(reports(5, 3, 10));
  CHECK(v == std::vector<std::string>{"veh0", "veh1", "veh2", "veh3", "veh4"});
}

}  // TEST_SUITE
