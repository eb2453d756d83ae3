#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedgru/config.h"
#include "fedgru/experiment.h"

namespace fedgru::cli {

// File names inside the output directory.
inline constexpr const char* kRoundsFile = "rounds.jsonl";
inline constexpr const char* kMetricsFile = "metrics.csv";
inline constexpr const char* kLossFile = "loss_by_round.csv";
inline constexpr const char* kLossDistributionFile = "loss_distribution.csv";
inline constexpr const char* kMddFile = "mdd.csv";
inline constexpr const char* kFractionMetricsFile = "metrics_by_fraction.csv";
inline constexpr const char* kBatchSweepFile = "batch_sweep.csv";
inline constexpr const char* kSummaryFile = "summary.json";

// Shortest text that parses back to the same double.
std::string format_real(double v);

nlohmann::json round_log_json(double fraction, const federation::RoundLog& log);

void write_round_logs(const std::filesystem::path& path, const std::vector<FractionRun>& runs);
void write_metrics_table(const std::filesystem::path& path, const std::vector<FractionRun>& runs);
// verdicts_<index>.csv for the index-th sweep fraction.
std::string verdicts_file(std::size_t fraction_index);
void write_verdicts(const std::filesystem::path& path, const FractionRun& run);
void write_batch_sweep(const std::filesystem::path& path, const std::vector<BatchPoint>& points);
void write_summary(const std::filesystem::path& path, const ExperimentConfig& config, const ExperimentResult& result);

// Plot-ready CSVs: loss per node and round (node 0 is the global model),
// held-out loss distribution per node, MDD per node, metrics per fraction.
void emit_plot_data(const std::vector<FractionRun>& runs, const std::filesystem::path& dir);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // throws DataError if absent
};

CsvTable read_csv(const std::filesystem::path& path);
std::vector<nlohmann::json> read_round_logs(const std::filesystem::path& path);

// metrics.csv parsed back: cell(round_row, fraction_col) holds ACC, DR, FPR,
// FNR with nullopt for undefined entries.
struct MetricsTable {
  std::vector<double> fractions;
  std::vector<int> rounds;
  struct Cell {
    std::optional<double> acc, dr, fpr, fnr;
  };
  std::vector<std::vector<Cell>> cells;  // [round][fraction]
};

MetricsTable read_metrics_table(const std::filesystem::path& path);

}  // namespace fedgru::cli
