#include <doctest.h>

#include <random>

#include "fedgru/detector.h"
#include "fedgru/errors.h"

using namespace fedgru;
using namespace fedgru::detector;

namespace {

std::vector<PairedDelay> pairs(std::initializer_list<std::pair<double, double>> v) {
  std::vector<PairedDelay> out;
  long s = 0;
  for (auto [p, r] : v) out.push_back({s++, p, r});
  return out;
}

traces::DelayReport report(const std::string& v, long slot, int node, double d, bool poisoned = false) {
  traces::DelayReport r;
  r.vehicle_id = v;
  r.slot = slot;
  r.node_id = node;
  r.delay_ms = d;
  r.poisoned = poisoned;
  return r;
}

}  // namespace

TEST_SUITE("detector") {

TEST_CASE("detect_slot") {
  CHECK(detect_slot(50, 70, 10));
  CHECK_FALSE(detect_slot(50, 55, 10));
  CHECK_FALSE(detect_slot(50, 60, 10));
  CHECK_FALSE(detect_slot(60, 50, 10));
  CHECK(detect_slot(50, 60.000001, 10));
  for (double a : {0.0, 3.0, 25.0})
    for (double b : {1.0, 14.0, 40.0}) CHECK(detect_slot(a, b, 10) == detect_slot(b, a, 10));
}

TEST_CASE("detect_vehicle mean rule") {
  const DetectionConfig c;
  auto v = detect_vehicle("a", pairs({{30, 30}, {31, 31}}), c, 1);
  REQUIRE(v);
  CHECK_FALSE(v->flagged);
  CHECK(v->mean_abs_diff == 0.0);

  v = detect_vehicle("a", pairs({{30, 10}, {40, 20}}), c, 1);
  CHECK(v->flagged);
  CHECK(v->mean_abs_diff == 20.0);

  v = detect_vehicle("a", pairs({{30, 18}, {30, 26}}), c, 2);
  CHECK_FALSE(v->flagged);
  CHECK(v->mean_abs_diff == 8.0);
  CHECK(v->round == 2);
  CHECK(v->slots == 2);

  CHECK_FALSE(detect_vehicle("a", {}, c, 1).has_value());
}

TEST_CASE("detect_vehicle alternative rules") {
  DetectionConfig c;
  const auto p = pairs({{30, 30}, {30, 30}, {30, 5}});
  c.rule = VerdictRule::any_slot;
  CHECK(detect_vehicle("a", p, c, 1)->flagged);
  c.rule = VerdictRule::majority;
  CHECK_FALSE(detect_vehicle("a", p, c, 1)->flagged);
  CHECK(detect_vehicle("a", pairs({{30, 5}, {30, 5}, {30, 30}}), c, 1)->flagged);
  c.rule = VerdictRule::mean;
  CHECK_FALSE(detect_vehicle("a", p, c, 1)->flagged);
  CHECK(verdict_rule_from_string("majority") == VerdictRule::majority);
  CHECK(std::string(to_string(VerdictRule::any_slot)) == "any_slot");
  CHECK_THROWS(verdict_rule_from_string("median"));
}

TEST_CASE("single-slot horizon matches detect_slot; monotone in the deviation") {
  DetectionConfig c;
  c.horizon = 1;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (int i = 0; i < 200; ++i) {
    const double a = u(rng), b = u(rng);
    CHECK(detect_vehicle("v", pairs({{a, b}}), c, 1)->flagged == detect_slot(a, b, c.threshold_ms));
  }
  for (int i = 0; i < 100; ++i) {
    std::vector<PairedDelay> p;
    for (long s = 0; s < 5; ++s) p.push_back({s, 30.0, u(rng)});
    const bool before = detect_vehicle("v", p, c, 1)->flagged;
    for (auto& x : p) x.received_ms = x.received_ms < 30.0 ? x.received_ms - 2.0 : x.received_ms + 2.0;
    if (before) CHECK(detect_vehicle("v", p, c, 1)->flagged);
  }
}

TEST_CASE("DetectionConfig validation") {
  DetectionConfig c;
  c.threshold_ms = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = DetectionConfig{};
  c.horizon = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("detect_all pairs reports with their node forecast") {
  const std::vector<NodeForecast> f{{1, 10, {30, 30, 30}}, {2, 10, {50, 50, 50}}};
  const std::vector<traces::DelayReport> reps{
      report("b", 10, 1, 31), report("b", 11, 1, 29), report("a", 10, 2, 20), report("a", 12, 2, 22),
      report("c", 9, 1, 0),   report("c", 13, 1, 0),  report("d", 11, 3, 0)};
  const auto v = detect_all(f, reps, DetectionConfig{}, 4);
  REQUIRE(v.size() == 2);
  CHECK(v[0].vehicle_id == "a");
  CHECK(v[0].flagged);
  CHECK(v[0].mean_abs_diff == 29.0);
  CHECK(v[0].slots == 2);
  CHECK(v[1].vehicle_id == "b");
  CHECK_FALSE(v[1].flagged);
  CHECK(v[1].round == 4);
}

TEST_CASE("detect_all: serial and parallel agree; poisoned flags and other vehicles do not matter") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0.0, 6.0);
  std::vector<NodeForecast> f;
  for (int n = 1; n <= 5; ++n) {
    NodeForecast nf{n, 100, {}};
    for (int s = 0; s < 20; ++s) nf.predicted_ms.push_back(25.0 + n + 0.1 * s);
    f.push_back(nf);
  }
  std::vector<traces::DelayReport> reps;
  for (int v = 0; v < 60; ++v)
    for (long s = 100; s < 120; ++s) reps.push_back(report("v" + std::to_string(v), s, 1 + v % 5, 28.0 + noise(rng), v % 7 == 0));

  const DetectionConfig c;
  const auto serial = detect_all(f, reps, c, 1, Execution::serial);
  const auto parallel = detect_all(f, reps, c, 1, Execution::parallel);
  CHECK(serial == parallel);

  auto flipped = reps;
  std::shuffle(flipped.begin(), flipped.end(), rng);
  for (auto& r : flipped) r.poisoned = (rng() & 1) != 0;
  CHECK(detect_all(f, flipped, c, 1) == serial);

  auto others = reps;
  for (auto& r : others)
    if (r.vehicle_id != "v3") r.delay_ms += 40.0;
  const auto changed = detect_all(f, others, c, 1);
  const auto pick = [](const std::vector<Verdict>& vs) {
    return *std::find_if(vs.begin(), vs.end(), [](const Verdict& x) { return x.vehicle_id == "v3"; });
  };
  CHECK(pick(changed) == pick(serial));
}

}  // TEST_SUITE
