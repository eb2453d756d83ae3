#include "fedgru/results_io.h"

#include <charconv>
#include <fstream>
#include <sstream>

#include "fedgru/errors.h"

namespace fedgru::cli {

namespace {

using Rate = double (*)(const metrics::ConfusionCounts&);

std::optional<double> rate_or_none(Rate fn, const metrics::ConfusionCounts& c) {
  try {
    return fn(c);
  } catch (const MetricUndefined&) {
    return std::nullopt;
  }
}

std::string cell(const std::optional<double>& v) { return v ? format_real(*v) : "NA"; }

nlohmann::json json_rate(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::optional<double> parse_cell(const std::string& s) {
  if (s == "NA") return std::nullopt;
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw DataError("bad numeric cell '" + s + "'");
  return v;
}

nlohmann::json counts_json(const metrics::ConfusionCounts& c) {
  return {{"tp", c.tp}, {"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}};
}

nlohmann::json rates_json(const metrics::ConfusionCounts& c) {
  return {{"acc", json_rate(rate_or_none(metrics::accuracy, c))},
          {"dr", json_rate(rate_or_none(metrics::detection_rate, c))},
          {"fpr", json_rate(rate_or_none(metrics::false_positive_rate, c))},
          {"fnr", json_rate(rate_or_none(metrics::false_negative_rate, c))}};
}

metrics::ConfusionCounts pooled(const FractionRun& run) {
  metrics::ConfusionCounts total;
  for (const auto& log : run.state.history) total += log.counts;
  return total;
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw DataError("cannot format number");
  return std::string(buf, p);
}

nlohmann::json round_log_json(double fraction, const federation::RoundLog& log) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : log.nodes) {
    nodes.push_back({{"node_id", n.node_id},
                     {"train_loss", n.train_loss},
                     {"global_fit_loss", n.global_fit_loss},
                     {"heldout_local", n.heldout_local},
                     {"heldout_global", n.heldout_global},
                     {"mdd_ms", n.mdd_ms},
                     {"norm_mean", n.stats.mean},
                     {"norm_std", n.stats.std},
                     {"predicted_ms", n.predicted_ms},
                     {"received_ms", n.received_ms}});
  }
  nlohmann::json verdicts = nlohmann::json::array();
  for (const auto& v : log.verdicts)
    verdicts.push_back({{"vehicle_id", v.vehicle_id}, {"mean_abs_diff", v.mean_abs_diff}, {"flagged", v.flagged}});
  nlohmann::json j = {{"fraction", fraction},
                      {"round", log.round},
                      {"window_start", log.window.start},
                      {"window_length", log.window.length},
                      {"horizon_start", log.horizon_start},
                      {"counts", counts_json(log.counts)},
                      {"train_loss_sum", log.train_loss.sum},
                      {"train_loss_mean", log.train_loss.mean},
                      {"global_loss", log.global_loss},
                      {"heldout_global", log.heldout_global},
                      {"mdd_ms", log.mdd_ms},
                      {"skipped_nodes", log.skipped_nodes},
                      {"verdicts", verdicts},
                      {"nodes", nodes}};
  j.update(rates_json(log.counts));
  return j;
}

void write_round_logs(const std::filesystem::path& path, const std::vector<FractionRun>& runs) {
  auto out = open_out(path);
  for (const auto& run : runs)
    for (const auto& log : run.state.history) out << round_log_json(run.fraction, log).dump() << '\n';
}

void write_metrics_table(const std::filesystem::path& path, const std::vector<FractionRun>& runs) {
  auto out = open_out(path);
  out << "round";
  for (const auto& run : runs) {
    const auto f = format_real(run.fraction);
    out << ",acc@" << f << ",dr@" << f << ",fpr@" << f << ",fnr@" << f;
  }
  out << '\n';
  std::size_t rounds = 0;
  for (const auto& run : runs) rounds = std::max(rounds, run.state.history.size());
  for (std::size_t r = 0; r < rounds; ++r) {
    out << 'R' << (r + 1);
    for (const auto& run : runs) {
      if (r >= run.state.history.size()) {
        out << ",NA,NA,NA,NA";
        continue;
      }
      const auto& c = run.state.history[r].counts;
      out << ',' << cell(rate_or_none(metrics::accuracy, c)) << ',' << cell(rate_or_none(metrics::detection_rate, c))
          << ',' << cell(rate_or_none(metrics::false_positive_rate, c)) << ','
          << cell(rate_or_none(metrics::false_negative_rate, c));
    }
    out << '\n';
  }
}

std::string verdicts_file(std::size_t fraction_index) { return "verdicts_" + std::to_string(fraction_index) + ".csv"; }

void write_verdicts(const std::filesystem::path& path, const FractionRun& run) {
  auto out = open_out(path);
  out << "round,vehicle_id,mean_abs_diff,flagged\n";
  for (const auto& log : run.state.history)
    for (const auto& v : log.verdicts)
      out << v.round << ',' << v.vehicle_id << ',' << format_real(v.mean_abs_diff) << ',' << (v.flagged ? 1 : 0) << '\n';
}

void emit_plot_data(const std::vector<FractionRun>& runs, const std::filesystem::path& dir) {
  auto loss = open_out(dir / kLossFile);
  auto dist = open_out(dir / kLossDistributionFile);
  auto mdd = open_out(dir / kMddFile);
  auto frac = open_out(dir / kFractionMetricsFile);
  loss << "fraction,round,node_id,loss\n";
  dist << "fraction,round,node_id,heldout_loss\n";
  mdd << "fraction,round,node_id,mdd_ms\n";
  frac << "fraction,tp,tn,fp,fn,acc,dr,fpr,fnr\n";

  for (const auto& run : runs) {
    const auto f = format_real(run.fraction);
    for (const auto& log : run.state.history) {
      loss << f << ',' << log.round << ',' << federation::kGlobalNode << ',' << format_real(log.global_loss) << '\n';
      for (const auto& n : log.nodes) loss << f << ',' << log.round << ',' << n.node_id << ',' << format_real(n.train_loss) << '\n';

      dist << f << ',' << log.round << ',' << federation::kGlobalNode << ',' << format_real(log.heldout_global) << '\n';
      for (const auto& n : log.nodes) dist << f << ',' << log.round << ',' << n.node_id << ',' << format_real(n.heldout_local) << '\n';

      for (const auto& n : log.nodes) mdd << f << ',' << log.round << ',' << n.node_id << ',' << format_real(n.mdd_ms) << '\n';
    }
    const auto c = pooled(run);
    frac << f << ',' << c.tp << ',' << c.tn << ',' << c.fp << ',' << c.fn << ','
         << cell(rate_or_none(metrics::accuracy, c)) << ',' << cell(rate_or_none(metrics::detection_rate, c)) << ','
         << cell(rate_or_none(metrics::false_positive_rate, c)) << ','
         << cell(rate_or_none(metrics::false_negative_rate, c)) << '\n';
  }
}

void write_batch_sweep(const std::filesystem::path& path, const std::vector<BatchPoint>& points) {
  auto out = open_out(path);
  out << "batch_len,horizon,fraction,round,train_loss_sum,train_loss_mean\n";
  for (const auto& p : points)
    for (std::size_t r = 0; r < p.train_loss.size(); ++r)
      out << p.batch_len << ',' << p.horizon << ',' << format_real(p.fraction) << ',' << (r + 1) << ','
          << format_real(p.train_loss[r].sum) << ',' << format_real(p.train_loss[r].mean) << '\n';
}

void write_summary(const std::filesystem::path& path, const ExperimentConfig& config, const ExperimentResult& result) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& run : result.runs) {
    const auto c = pooled(run);
    nlohmann::json j = {{"fraction", run.fraction},
                        {"vehicles", run.vehicles.size()},
                        {"compromised", std::vector<std::string>(run.assignment.compromised.begin(), run.assignment.compromised.end())},
                        {"poisoned_reports", run.poisoned_reports},
                        {"verdicts_file", verdicts_file(run.index)},
                        {"rounds", run.state.history.size()},
                        {"counts", counts_json(c)}};
    j.update(rates_json(c));
    runs.push_back(std::move(j));
  }
  nlohmann::json hidden = nlohmann::json::array();
  for (auto h : config.shape.hidden) hidden.push_back(h);
  const nlohmann::json summary = {
      {"seed", config.seed},
      {"local_nodes", config.fed.num_local},
      {"rounds", config.fed.rounds},
      {"batch_len", config.train.batch_len},
      {"horizon", config.train.horizon},
      {"epochs", config.train.epochs},
      {"hidden", hidden},
      {"threshold_ms", config.detect.threshold_ms},
      {"rule", detector::to_string(config.detect.rule)},
      {"attack_onset_slot", config.onset_slot()},
      {"margin_ms", config.attack.margin_ms},
      {"runs", runs}};
  auto out = open_out(path);
  out << summary.dump(2) << '\n';
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw DataError("missing column '" + name + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (first) {
      table.header = std::move(fields);
      first = false;
      continue;
    }
    if (fields.size() != table.header.size())
      throw DataError(path.filename().string() + ": row width differs from header");
    table.rows.push_back(std::move(fields));
  }
  if (first) throw DataError(path.string() + " is empty");
  return table;
}

std::vector<nlohmann::json> read_round_logs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<nlohmann::json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("bad round log line: ") + e.what());
    }
  }
  return out;
}

MetricsTable read_metrics_table(const std::filesystem::path& path) {
  const auto csv = read_csv(path);
  if (csv.header.empty() || csv.header[0] != "round" || (csv.header.size() - 1) % 4 != 0)
    throw DataError("metrics table header is malformed");
  MetricsTable t;
  for (std::size_t c = 1; c < csv.header.size(); c += 4) {
    const auto& h = csv.header[c];
    const auto at = h.find('@');
    if (h.substr(0, at) != "acc" || at == std::string::npos) throw DataError("metrics table header is malformed");
    t.fractions.push_back(*parse_cell(h.substr(at + 1)));
  }
  for (const auto& row : csv.rows) {
    if (row[0].empty() || row[0][0] != 'R') throw DataError("metrics row label must look like R<n>");
    t.rounds.push_back(std::stoi(row[0].substr(1)));
    std::vector<MetricsTable::Cell> cells;
    for (std::size_t c = 1; c < row.size(); c += 4)
      cells.push_back({parse_cell(row[c]), parse_cell(row[c + 1]), parse_cell(row[c + 2]), parse_cell(row[c + 3])});
    t.cells.push_back(std::move(cells));
  }
  return t;
}

}  // namespace fedgru::cli
