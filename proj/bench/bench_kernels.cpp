// Serial reference vs OpenMP paths of the parallel kernels.
// Argument 0 = serial, 1 = parallel.

#include <benchmark/benchmark.h>

#include <random>

#include "fedgru/detector.h"
#include "fedgru/federation.h"
#include "fedgru/gru.h"

using namespace fedgru;

namespace {

Execution mode(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::serial : Execution::parallel;
}

std::vector<std::vector<double>> random_sets(std::size_t n, std::size_t len) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> out(n, std::vector<double>(len));
  for (auto& v : out)
    for (auto& x : v) x = g(rng);
  return out;
}

std::vector<traces::DelayReport> grid(int nodes, int vehicles_per_node, long slots) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> noise(0.0, 2.0);
  std::vector<traces::DelayReport> out;
  for (long s = 0; s < slots; ++s)
    for (int n = 1; n <= nodes; ++n)
      for (int v = 0; v < vehicles_per_node; ++v) {
        traces::DelayReport r;
        r.vehicle_id = "n" + std::to_string(n) + "v" + std::to_string(v);
        r.slot = s;
        r.node_id = n;
        r.delay_ms = 25.0 + n + 3.0 * std::sin(0.1 * static_cast<double>(s)) + noise(rng);
        out.push_back(r);
      }
  return out;
}

void BM_FedAverage(benchmark::State& state) {
  grunet::ModelShape shape;  // full-size model
  const auto sets = random_sets(5, grunet::parameter_count(shape));
  const std::vector<std::span<const double>> spans(sets.begin(), sets.end());
  const std::vector<double> w(5, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(federation::fed_average(spans, w, mode(state)));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * 5 * sets[0].size() * sizeof(double)));
}
BENCHMARK(BM_FedAverage)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_DetectAll(benchmark::State& state) {
  const auto reps = grid(5, 400, 20);
  std::vector<detector::NodeForecast> f;
  for (int n = 1; n <= 5; ++n) f.push_back({n, 0, std::vector<double>(20, 26.0 + n)});
  const detector::DetectionConfig c;
  for (auto _ : state) benchmark::DoNotOptimize(detector::detect_all(f, reps, c, 1, mode(state)));
}
BENCHMARK(BM_DetectAll)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_RunRound(benchmark::State& state) {
  const auto reps = grid(5, 10, 120);
  federation::RoundInputs in;
  in.reports = reps;
  in.train.batch_len = 100;
  in.train.horizon = 10;
  in.train.epochs = 20;
  in.detect.horizon = 10;
  in.execution = mode(state);
  grunet::ModelShape shape;
  shape.hidden = {8, 16, 32};
  const auto init = grunet::init_params(shape, 3);
  for (auto _ : state) {
    federation::GlobalState g{init, 0, {}};
    auto nodes = federation::make_local_nodes(in.fed, in.train.batch_len);
    benchmark::DoNotOptimize(federation::run_round(g, nodes, in));
  }
}
BENCHMARK(BM_RunRound)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
