#include "fedgru/federation.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>

#include "fedgru/errors.h"
#include "fedgru/rng.h"

namespace fedgru::federation {

void FederationConfig::validate() const {
  if (num_local < 1) throw ConfigError("num_local must be at least 1");
  if (cluster_size != num_local + 1)
    throw ConfigError("cluster_size must equal num_local + 1 (got " + std::to_string(cluster_size) + " for " +
                      std::to_string(num_local) + " local nodes)");
  if (rounds < 1) throw ConfigError("rounds must be at least 1");
  if (!weights.empty() && weights.size() != num_local)
    throw ConfigError("weights must list one value per local node");
  for (double w : weights)
    if (!(w > 0.0)) throw ConfigError("weights must be positive");
}

double FederationConfig::weight(std::size_t local_index) const {
  return weights.empty() ? 1.0 : weights.at(local_index);
}

Window slide_window(Window w) { return {w.start + 1, w.length}; }

namespace {

void check_average_args(std::span<const std::span<const double>> locals, std::span<const double> weights) {
  if (locals.empty()) throw StructuralError("fed_average: no local parameter vectors");
  if (weights.size() != locals.size()) throw StructuralError("fed_average: one weight per local vector required");
  for (const auto& l : locals)
    if (l.size() != locals.front().size()) throw StructuralError("fed_average: parameter layouts differ");
}

}  // namespace

std::vector<double> fed_average_serial(std::span<const std::span<const double>> locals,
                                       std::span<const double> weights) {
  check_average_args(locals, weights);
  const std::size_t n = locals.front().size();
  const double count = static_cast<double>(locals.size());
  std::vector<double> out(n, 0.0);
  for (std::size_t e = 0; e < n; ++e) {
    double s = 0.0;
    for (std::size_t i = 0; i < locals.size(); ++i) s += weights[i] * locals[i][e];
    out[e] = s / count;
  }
  return out;
}

std::vector<double> fed_average(std::span<const std::span<const double>> locals,
                                std::span<const double> weights,
                                Execution execution) {
  if (execution == Execution::serial) return fed_average_serial(locals, weights);
  check_average_args(locals, weights);
  const auto n = static_cast<long>(locals.front().size());
  const double count = static_cast<double>(locals.size());
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  double* dst = out.data();
#pragma omp parallel for schedule(static)
  for (long e = 0; e < n; ++e) {
    double s = 0.0;
    for (std::size_t i = 0; i < locals.size(); ++i) s += weights[i] * locals[i][static_cast<std::size_t>(e)];
    dst[e] = s / count;
  }
  return out;
}

grunet::ModelParams fed_average(std::span<const grunet::ModelParams> locals,
                                std::span<const double> weights,
                                Execution execution) {
  if (locals.empty()) throw StructuralError("fed_average: no local models");
  std::vector<std::span<const double>> views;
  views.reserve(locals.size());
  for (const auto& l : locals) {
    if (!(l.layout() == locals.front().layout())) throw StructuralError("fed_average: model layouts differ");
    views.push_back(l.flat());
  }
  return grunet::ModelParams::unflatten(locals.front().shape(), fed_average(views, weights, execution));
}

bool local_update(LocalNodeState& node,
                  const grunet::ModelParams& global,
                  std::span<const traces::DelayReport> node_reports,
                  const grunet::TrainConfig& config,
                  double initial_ms) {
  node.params = global;
  node.loss_trace.clear();
  const bool has_data = std::any_of(node_reports.begin(), node_reports.end(), [&](const traces::DelayReport& r) {
    return r.node_id == node.node_id && r.slot >= node.window.start && r.slot < node.window.end();
  });
  node.skipped = !has_data;
  if (!has_data) return false;

  const auto series = traces::make_node_series(node_reports, node.node_id, node.window.start, node.window.length, initial_ms);
  for (double v : series.values)
    if (!std::isfinite(v)) throw DataError("node " + std::to_string(node.node_id) + ": non-finite delay in its window");
  node.stats = traces::zscore_fit(series.values);
  node.normalized_window = traces::zscore_apply(series.values, node.stats);
  auto trained = grunet::train_epochs(node.normalized_window, global, config);
  node.params = std::move(trained.params);
  node.loss_trace = std::move(trained.loss_trace);
  return true;
}

std::vector<LocalNodeState> make_local_nodes(const FederationConfig& fed, long batch_len, long first_slot) {
  std::vector<LocalNodeState> nodes(fed.num_local);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    nodes[i].node_id = static_cast<int>(i) + 1;
    nodes[i].window = {first_slot, batch_len};
  }
  return nodes;
}

long required_slots(const grunet::TrainConfig& train, const FederationConfig& fed) {
  return train.batch_len + fed.rounds + train.horizon;
}

namespace {

double to_ms(double normalized, const traces::NormStats& stats) {
  return stats.degenerate() ? stats.mean : traces::zscore_invert(normalized, stats);
}

template <class Fn>
void for_each_index(std::size_t n, Execution execution, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long>(n);
  if (execution == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (long i = 0; i < count; ++i) {
      try {
        fn(static_cast<std::size_t>(i));
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  } else {
    for (long i = 0; i < count; ++i) {
      try {
        fn(static_cast<std::size_t>(i));
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

RoundLog run_round(GlobalState& global, std::vector<LocalNodeState>& nodes, const RoundInputs& inputs) {
  if (nodes.empty()) throw ConfigError("run_round: no local nodes");
  if (inputs.train.horizon != inputs.detect.horizon)
    throw ConfigError("training and detection horizons differ");
  const int round = global.round + 1;
  const long horizon = inputs.detect.horizon;

  // Reports each node can see this round: its window plus the horizon.
  std::map<int, std::vector<traces::DelayReport>> per_node;
  for (const auto& n : nodes) per_node[n.node_id];
  for (const auto& r : inputs.reports) {
    auto it = per_node.find(r.node_id);
    if (it == per_node.end()) continue;
    const auto& n = *std::find_if(nodes.begin(), nodes.end(), [&](const auto& s) { return s.node_id == r.node_id; });
    if (r.slot >= n.window.start && r.slot < n.window.end() + horizon) it->second.push_back(r);
  }

  std::vector<LocalNodeState> work = nodes;
  try {
    for_each_index(work.size(), inputs.execution, [&](std::size_t i) {
      auto cfg = inputs.train;
      cfg.seed = derive_rng(inputs.seed, {stream::kLocalTrain, static_cast<std::uint64_t>(work[i].node_id),
                                          static_cast<std::uint64_t>(round)})();
      local_update(work[i], global.global, per_node[work[i].node_id], cfg, inputs.initial_ms);
    });
  } catch (const std::exception& e) {
    throw DataError("round " + std::to_string(round) + " aborted: " + e.what());
  }

  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < work.size(); ++i)
    if (!work[i].skipped) live.push_back(i);
  if (live.empty()) throw DataError("round " + std::to_string(round) + " aborted: no local node has data in its window");

  std::vector<int> log_skipped;
  std::vector<grunet::ModelParams> trained;
  std::vector<double> weights;
  for (const auto& n : work)
    if (n.skipped) log_skipped.push_back(n.node_id);
  for (auto i : live) {
    trained.push_back(work[i].params);
    weights.push_back(inputs.fed.weight(static_cast<std::size_t>(work[i].node_id - 1)));
  }
  auto averaged = fed_average(trained, weights, inputs.execution);
  if (!averaged.all_finite()) throw DataError("round " + std::to_string(round) + " aborted: non-finite global parameters");

  RoundLog log;
  log.round = round;
  log.window = work.front().window;
  log.horizon_start = log.window.end();
  log.nodes.resize(live.size());
  log.skipped_nodes = std::move(log_skipped);

  std::vector<std::vector<double>> horizon_norm(live.size());
  try {
    for_each_index(live.size(), inputs.execution, [&](std::size_t k) {
      const auto& node = work[live[k]];
      auto& rec = log.nodes[k];
      rec.node_id = node.node_id;
      rec.stats = node.stats;
      rec.train_loss = node.loss_trace.empty() ? grunet::evaluate_loss(node.normalized_window, node.params)
                                               : node.loss_trace.back();
      rec.global_fit_loss = grunet::evaluate_loss(node.normalized_window, averaged);

      const auto forecast = grunet::predict_future(node.normalized_window, averaged, horizon);
      rec.predicted_ms.reserve(forecast.size());
      for (double v : forecast) rec.predicted_ms.push_back(to_ms(v, node.stats));

      const double last = node.stats.degenerate() ? node.stats.mean : to_ms(node.normalized_window.back(), node.stats);
      rec.received_ms = traces::make_node_series(per_node[node.node_id], node.node_id, node.window.end(), horizon, last).values;
      rec.mdd_ms = metrics::mean_delay_difference(rec.predicted_ms, rec.received_ms);
      horizon_norm[k] = traces::zscore_apply(rec.received_ms, node.stats);
      rec.heldout_global = grunet::hmse_loss(forecast, horizon_norm[k]);
    });

    if (inputs.evaluate_local_models) {
      for_each_index(live.size(), inputs.execution, [&](std::size_t j) {
        double sum = 0.0;
        for (std::size_t k = 0; k < live.size(); ++k) {
          const auto pred = grunet::predict_future(work[live[k]].normalized_window, work[live[j]].params, horizon);
          sum += grunet::hmse_loss(pred, horizon_norm[k]);
        }
        log.nodes[j].heldout_local = sum / static_cast<double>(live.size());
      });
    }
  } catch (const std::exception& e) {
    throw DataError("round " + std::to_string(round) + " aborted: " + e.what());
  }

  std::vector<detector::NodeForecast> forecasts;
  for (const auto& rec : log.nodes) forecasts.push_back({rec.node_id, log.horizon_start, rec.predicted_ms});
  std::vector<traces::DelayReport> horizon_reports;
  for (const auto& [id, reps] : per_node)
    for (const auto& r : reps)
      if (r.slot >= log.horizon_start && r.slot < log.horizon_start + horizon) horizon_reports.push_back(r);
  log.verdicts = detector::detect_all(forecasts, horizon_reports, inputs.detect, round, inputs.execution);
  if (inputs.truth) log.counts = metrics::update_confusion(log.verdicts, *inputs.truth);

  std::vector<double> losses;
  double gl = 0.0, hg = 0.0, mdd = 0.0;
  for (const auto& rec : log.nodes) {
    losses.push_back(rec.train_loss);
    gl += rec.global_fit_loss;
    hg += rec.heldout_global;
    mdd += rec.mdd_ms;
  }
  const double n = static_cast<double>(log.nodes.size());
  log.train_loss = metrics::training_loss_aggregate(losses);
  log.global_loss = gl / n;
  log.heldout_global = hg / n;
  log.mdd_ms = mdd / n;

  for (auto& node : work) node.window = slide_window(node.window);
  nodes = std::move(work);
  global.global = std::move(averaged);
  global.round = round;
  global.history.push_back(log);
  return log;
}

GlobalState run_continual(const RoundInputs& inputs, const grunet::ModelShape& shape) {
  inputs.fed.validate();
  inputs.train.validate();
  inputs.detect.validate();

  long span = 0;
  for (const auto& r : inputs.reports) span = std::max(span, r.slot + 1);
  const long need = required_slots(inputs.train, inputs.fed);
  if (span < need)
    throw ConfigError("insufficient data: " + std::to_string(need) + " slots required (S + R + t'), reports cover " +
                      std::to_string(span));

  GlobalState state;
  state.global = grunet::init_params(shape, derive_rng(inputs.seed, {stream::kInit})());
  auto nodes = make_local_nodes(inputs.fed, inputs.train.batch_len);
  for (int r = 0; r < inputs.fed.rounds; ++r) {
    const auto log = run_round(state, nodes, inputs);
    if (inputs.on_round) inputs.on_round(state, log);
  }
  return state;
}

}  // namespace fedgru::federation
