#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "fedgru/errors.h"
#include "fedgru/federation.h"
#include "fedgru/rng.h"
#include "support.h"

using namespace fedgru;
using namespace fedgru::federation;

namespace {

grunet::ModelShape tiny_shape() {
  grunet::ModelShape s;
  s.hidden = {3, 4};
  return s;
}

grunet::TrainConfig tiny_train(long S, long horizon, int epochs) {
  grunet::TrainConfig t;
  t.batch_len = S;
  t.horizon = horizon;
  t.epochs = epochs;
  return t;
}

// Every vehicle of node n reports the same `delay(n, slot)`.
template <class F>
std::vector<traces::DelayReport> grid_reports(int nodes, int per_node, long slots, F delay) {
  std::vector<traces::DelayReport> out;
  for (long s = 0; s < slots; ++s)
    for (int n = 1; n <= nodes; ++n)
      for (int v = 0; v < per_node; ++v) {
        traces::DelayReport r;
        r.vehicle_id = "n" + std::to_string(n) + "v" + std::to_string(v);
        r.slot = s;
        r.node_id = n;
        r.delay_ms = delay(n, s);
        out.push_back(r);
      }
  return out;
}

std::vector<traces::DelayReport> synthetic(std::size_t nodes, std::size_t vehicles, long slots, std::uint64_t seed) {
  traces::MobilityConfig mc;
  mc.vehicles = vehicles;
  mc.slots = slots;
  mc.seed = seed;
  const auto placed = traces::place_edge_nodes(traces::area_grid(mc.origin, mc.area_km, 12), nodes);
  traces::SynthesisParams p;
  p.seed = seed + 1;
  return traces::synthesize_delays(mc, placed, p);
}

RoundInputs inputs_for(std::span<const traces::DelayReport> reps, std::size_t K, int R, long S, long horizon, int epochs) {
  RoundInputs in;
  in.reports = reps;
  in.train = tiny_train(S, horizon, epochs);
  in.detect.horizon = horizon;
  in.fed.num_local = K;
  in.fed.cluster_size = K + 1;
  in.fed.rounds = R;
  in.seed = 99;
  return in;
}

bool bit_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_SUITE("federation") {

TEST_CASE("fed_average examples") {
  const std::vector<double> a{2.0}, b{4.0};
  const std::vector<std::span<const double>> two{a, b};
  const std::vector<double> ones{1.0, 1.0};
  CHECK(fed_average(two, ones) == std::vector<double>{3.0});

  std::vector<std::vector<double>> five{{1}, {2}, {3}, {4}, {5}};
  std::vector<std::span<const double>> views(five.begin(), five.end());
  CHECK(fed_average(views, std::vector<double>(5, 1.0)) == std::vector<double>{3.0});

  const auto same = testsupport::random_vector(40, 5);
  std::vector<std::span<const double>> copies(4, same);
  const auto avg = fed_average(copies, std::vector<double>(4, 1.0));
  for (std::size_t i = 0; i < same.size(); ++i) CHECK(std::abs(avg[i] - same[i]) <= 1e-12 * std::max(1.0, std::abs(same[i])));

  std::vector<std::span<const double>> single{same};
  CHECK(fed_average(single, std::vector<double>{1.0}) == same);
}

TEST_CASE("fed_average divides the weighted sum by the node count") {
  const std::vector<double> a{1.0, 2.0}, b{3.0, 6.0};
  const std::vector<std::span<const double>> v{a, b};
  CHECK(fed_average(v, std::vector<double>{2.0, 1.0}) == std::vector<double>{2.5, 5.0});
}

TEST_CASE("fed_average structural errors") {
  const std::vector<double> a{1.0, 2.0}, b{3.0};
  const std::vector<std::span<const double>> bad{a, b};
  CHECK_THROWS_AS(fed_average(bad, std::vector<double>{1, 1}), StructuralError);
  const std::vector<std::span<const double>> ok{a, a};
  CHECK_THROWS_AS(fed_average(ok, std::vector<double>{1}), StructuralError);
  CHECK_THROWS_AS(fed_average(std::vector<std::span<const double>>{}, std::vector<double>{}), StructuralError);

  grunet::ModelShape s1 = tiny_shape(), s2 = tiny_shape();
  s2.hidden = {3, 5};
  const std::vector<grunet::ModelParams> models{grunet::init_params(s1, 1), grunet::init_params(s2, 1)};
  CHECK_THROWS_AS(fed_average(models, std::vector<double>{1, 1}), StructuralError);
}

TEST_CASE("fed_average kernels agree with an element-wise mean oracle") {
  for (std::uint64_t s = 0; s < 25; ++s) {
    const std::size_t k = 1 + s % 6, n = 17 + 31 * s;
    std::vector<std::vector<double>> locals;
    for (std::size_t i = 0; i < k; ++i) locals.push_back(testsupport::random_vector(n, 100 * s + i, -3, 3));
    std::vector<std::span<const double>> views(locals.begin(), locals.end());
    const std::vector<double> w(k, 1.0);
    const auto par = fed_average(views, w, Execution::parallel);
    const auto ser = fed_average_serial(views, w);
    CHECK(bit_equal(par, ser));
    for (std::size_t e = 0; e < n; ++e) {
      double oracle = 0.0;
      for (const auto& l : locals) oracle += l[e];
      oracle /= static_cast<double>(k);
      CHECK(std::abs(par[e] - oracle) <= 1e-12);
    }
  }
}

TEST_CASE("slide_window") {
  CHECK(slide_window({0, 200}) == Window{1, 200});
  CHECK(slide_window(slide_window(slide_window({0, 200}))) == Window{3, 200});
  Window w{7, 55};
  for (int i = 0; i < 100; ++i) w = slide_window(w);
  CHECK(w.length == 55);
  CHECK(w.start == 107);
}

TEST_CASE("FederationConfig validation") {
  FederationConfig f;
  CHECK_NOTHROW(f.validate());
  f.cluster_size = 5;
  CHECK_THROWS_AS(f.validate(), ConfigError);
  f = FederationConfig{};
  f.rounds = 0;
  CHECK_THROWS_AS(f.validate(), ConfigError);
  f = FederationConfig{};
  f.weights = {1, 1, 0, 1, 1};
  CHECK_THROWS_AS(f.validate(), ConfigError);
  f.weights = {1, 1};
  CHECK_THROWS_AS(f.validate(), ConfigError);
}

TEST_CASE("local_update") {
  const auto global = grunet::init_params(tiny_shape(), 4);
  const auto reps = grid_reports(2, 3, 30, [](int n, long s) { return 20.0 + 3.0 * n + std::sin(0.4 * static_cast<double>(s)); });

  SUBCASE("zero epochs returns the global parameters") {
    LocalNodeState node{1, {0, 20}, {}, {}, {}, {}, false};
    CHECK(local_update(node, global, reps, tiny_train(20, 2, 0)));
    CHECK(node.params.flatten() == global.flatten());
    CHECK(node.normalized_window.size() == 20);
    CHECK(node.stats.mean > 20.0);
  }
  SUBCASE("constant window converges") {
    const auto flat = grid_reports(1, 2, 30, [](int, long) { return 33.0; });
    LocalNodeState node{1, {0, 20}, {}, {}, {}, {}, false};
    local_update(node, global, flat, tiny_train(20, 2, 200));
    CHECK(node.stats.degenerate());
    CHECK(node.loss_trace.back() < 1e-3);
  }
  SUBCASE("same window and seed give identical parameters") {
    LocalNodeState a{1, {0, 20}, {}, {}, {}, {}, false}, b = a;
    auto cfg = tiny_train(20, 2, 15);
    cfg.seed = 8;
    local_update(a, global, reps, cfg);
    local_update(b, global, reps, cfg);
    CHECK(a.params.flatten() == b.params.flatten());
    CHECK(a.params.flatten() != global.flatten());
  }
  SUBCASE("empty window skips the node") {
    LocalNodeState node{5, {0, 20}, {}, {}, {}, {}, false};
    CHECK_FALSE(local_update(node, global, reps, tiny_train(20, 2, 5)));
    CHECK(node.skipped);
    CHECK(node.params.flatten() == global.flatten());
  }
}

TEST_CASE("run_round: constant traffic without attack flags nobody") {
  const auto reps = grid_reports(3, 4, 40, [](int, long) { return 30.0; });
  auto in = inputs_for(reps, 3, 1, 20, 4, 30);
  GlobalState g{grunet::init_params(tiny_shape(), 1), 0, {}};
  auto nodes = make_local_nodes(in.fed, 20);
  const auto log = run_round(g, nodes, in);
  CHECK(log.round == 1);
  CHECK(log.verdicts.size() == 12);
  for (const auto& v : log.verdicts) CHECK_FALSE(v.flagged);
  for (const auto& n : log.nodes) {
    CHECK(n.predicted_ms == std::vector<double>(4, 30.0));
    CHECK(n.mdd_ms == 0.0);
  }
  CHECK(g.round == 1);
  CHECK(nodes[0].window == Window{1, 20});
}

TEST_CASE("run_round: identical node data gives a global equal to every local") {
  const auto reps = grid_reports(3, 2, 40, [](int, long s) { return 25.0 + 4.0 * std::sin(0.5 * static_cast<double>(s)); });
  auto in = inputs_for(reps, 3, 1, 20, 4, 20);
  in.train.dropout_p = 0.0;
  GlobalState g{grunet::init_params(tiny_shape(), 2), 0, {}};
  auto nodes = make_local_nodes(in.fed, 20);
  run_round(g, nodes, in);
  for (const auto& n : nodes) {
    CHECK(n.params.flatten() == nodes[0].params.flatten());
    for (std::size_t i = 0; i < n.params.flatten().size(); ++i)
      CHECK(std::abs(g.global.flatten()[i] - n.params.flatten()[i]) <= 1e-12);
  }
}

TEST_CASE("run_round: skipped nodes are left out of the average") {
  const auto reps = grid_reports(4, 2, 40, [](int n, long s) {
    return n == 3 ? 0.0 : 20.0 + n + std::cos(0.3 * static_cast<double>(s));
  });
  std::vector<traces::DelayReport> kept;
  for (const auto& r : reps)
    if (r.node_id != 3) kept.push_back(r);
  auto in = inputs_for(kept, 4, 1, 20, 4, 10);
  GlobalState g{grunet::init_params(tiny_shape(), 3), 0, {}};
  auto nodes = make_local_nodes(in.fed, 20);
  const auto log = run_round(g, nodes, in);
  CHECK(log.skipped_nodes == std::vector<int>{3});
  CHECK(log.nodes.size() == 3);
  const auto& any = nodes[0].params.flatten();
  for (std::size_t e = 0; e < any.size(); ++e) {
    double oracle = 0.0;
    for (const auto& n : nodes)
      if (!n.skipped) oracle += n.params.flatten()[e];
    CHECK(std::abs(g.global.flatten()[e] - oracle / 3.0) <= 1e-12);
  }
}

TEST_CASE("run_round aborts without touching state when a node fails") {
  auto reps = grid_reports(3, 2, 40, [](int n, long) { return 20.0 + n; });
  reps[7].delay_ms = std::numeric_limits<double>::infinity();
  auto in = inputs_for(reps, 3, 1, 20, 4, 5);
  GlobalState g{grunet::init_params(tiny_shape(), 5), 0, {}};
  auto nodes = make_local_nodes(in.fed, 20);
  const auto before = g.global.flatten();
  const auto nodes_before = nodes;
  CHECK_THROWS_AS(run_round(g, nodes, in), DataError);
  CHECK(g.global.flatten() == before);
  CHECK(g.round == 0);
  CHECK(g.history.empty());
  for (std::size_t i = 0; i < nodes.size(); ++i) CHECK(nodes[i].window == nodes_before[i].window);

  in.detect.horizon = 5;
  CHECK_THROWS_AS(run_round(g, nodes, in), ConfigError);
}

TEST_CASE("required_slots and insufficient data") {
  grunet::TrainConfig t;
  FederationConfig f;
  CHECK(required_slots(t, f) == 230);
  const auto reps = grid_reports(5, 1, 229, [](int, long) { return 20.0; });
  RoundInputs in;
  in.reports = reps;
  CHECK_THROWS_WITH_AS(run_continual(in, tiny_shape()), doctest::Contains("230"), ConfigError);
}

TEST_CASE("run_continual on stationary synthetic traffic") {
  const auto reps = synthetic(3, 24, 40 + 3 + 4, 6);
  auto in = inputs_for(reps, 3, 3, 40, 4, 60);
  const auto state = run_continual(in, tiny_shape());
  REQUIRE(state.history.size() == 3);
  for (int r = 0; r < 3; ++r) CHECK(state.history[static_cast<std::size_t>(r)].round == r + 1);
  CHECK(state.history[1].train_loss.mean < state.history[0].train_loss.mean);
  CHECK(state.global.all_finite());
  CHECK(state.global.layout() == grunet::ParamLayout(tiny_shape()));
  CHECK(state.history[2].window == Window{2, 40});
  for (const auto& log : state.history) {
    CHECK(log.verdicts.size() == 24);
    CHECK(std::isfinite(log.mdd_ms));
    for (const auto& n : log.nodes) CHECK(n.heldout_local > 0.0);
  }
}

TEST_CASE("serial and parallel execution are bit-identical") {
  const auto reps = synthetic(3, 18, 30 + 2 + 3, 8);
  auto in = inputs_for(reps, 3, 2, 30, 3, 15);
  in.execution = Execution::serial;
  const auto a = run_continual(in, tiny_shape());
  in.execution = Execution::parallel;
  const auto b = run_continual(in, tiny_shape());
  CHECK(bit_equal(a.global.flatten(), b.global.flatten()));
  for (std::size_t r = 0; r < a.history.size(); ++r) {
    CHECK(a.history[r].verdicts == b.history[r].verdicts);
    CHECK(a.history[r].train_loss.sum == b.history[r].train_loss.sum);
    CHECK(a.history[r].heldout_global == b.history[r].heldout_global);
  }
  const auto c = run_continual(in, tiny_shape());
  CHECK(bit_equal(c.global.flatten(), b.global.flatten()));
}

}  // TEST_SUITE
