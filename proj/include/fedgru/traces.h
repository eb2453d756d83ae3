#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fedgru::traces {

inline constexpr double kEarthRadiusKm = 6371.0088;

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

double haversine_km(const GeoPoint& a, const GeoPoint& b);

// Point `north_km` / `east_km` away from `origin` on a local tangent plane.
GeoPoint offset_km(const GeoPoint& origin, double north_km, double east_km);

struct RawTracePoint {
  std::string vehicle_id;
  double timestamp = 0.0;  // seconds since epoch
  double lat = 0.0;
  double lon = 0.0;
};

struct TraceParseResult {
  std::vector<RawTracePoint> points;  // sorted by (vehicle_id, timestamp)
  std::size_t skipped_rows = 0;
};

// Reads `vehicle_id,timestamp,lat,lon` rows. A header line is optional.
// Malformed rows and rows with out-of-range coordinates are skipped and
// counted. Throws DataError if the file cannot be read or yields nothing.
TraceParseResult parse_trace_csv(const std::filesystem::path& path);

// One vehicle's reported delay for one slot. `poisoned` is ground truth
// for scoring only; nothing on the detection or training path reads it.
struct DelayReport {
  std::string vehicle_id;
  long slot = 0;
  int node_id = 0;  // local nodes are 1..K; node 0 is the global node
  double delay_ms = 0.0;
  bool poisoned = false;
  std::optional<GeoPoint> position;
};

struct DelayModel {
  double base_ms = 20.0;
  double per_km_ms = 5.0;
  double min_ms = 1.0;
  double noise_std_ms = 2.0;
  // City-wide congestion swing shared by every vehicle; zero disables it.
  double load_amplitude_ms = 0.0;
  double load_period_slots = 120.0;
};

struct SynthesisParams {
  double slot_len_s = 10.0;
  DelayModel model;
  std::uint64_t seed = 0;
};

// Random-waypoint taxis inside a square area, sampled once per slot.
struct MobilityConfig {
  std::size_t vehicles = 100;
  long slots = 240;
  double slot_len_s = 10.0;
  double area_km = 10.0;
  double min_speed_mps = 4.0;
  double max_speed_mps = 12.0;
  double active_prob = 1.0;  // chance a vehicle reports in a given slot
  GeoPoint origin{37.70, -122.50};
  double start_time = 1'211'018'400.0;
  std::uint64_t seed = 0;
};

std::vector<RawTracePoint> synthesize_mobility(const MobilityConfig& config);

// Turns vehicle activity into per-slot reports. Slot index is
// floor((t - t0) / slot_len) with t0 the earliest timestamp; a vehicle with
// several fixes in one slot reports once, from its last fix. Each report goes
// to the nearest node (node_id = index in `nodes` + 1) with
//   delay = base + per_km * distance + load(slot) + N(0, noise_std),
// clamped below at min_ms. Throws ConfigError on slot_len <= 0 or no nodes.
std::vector<DelayReport> synthesize_delays(std::span<const RawTracePoint> points,
                                           std::span<const GeoPoint> nodes,
                                           const SynthesisParams& params);

std::vector<DelayReport> synthesize_delays(const MobilityConfig& mobility,
                                           std::span<const GeoPoint> nodes,
                                           const SynthesisParams& params);

// Deterministic k-means placement of `count` edge nodes over `sample`.
std::vector<GeoPoint> place_edge_nodes(std::span<const GeoPoint> sample, std::size_t count);

// Uniform grid of sample points covering the square mobility area.
std::vector<GeoPoint> area_grid(const GeoPoint& origin, double area_km, std::size_t per_side);

// Tags every report with one local node (ids 1..cluster_size-1). Reports with
// a position go to the nearest of `local_nodes`; without positions (or without
// node locations) vehicles are dealt round-robin after a seeded shuffle.
// Returns the node of each report, parallel to `reports`.
// Throws ConfigError when cluster_size < 2.
std::vector<int> assign_vehicles_to_nodes(std::span<DelayReport> reports,
                                          std::size_t cluster_size,
                                          std::span<const GeoPoint> local_nodes,
                                          std::uint64_t seed);

struct NormStats {
  double mean = 0.0;
  double std = 0.0;

  static constexpr double kDegenerateStd = 1e-12;
  bool degenerate() const { return std < kDegenerateStd; }
};

// Arithmetic mean and population standard deviation.
NormStats zscore_fit(std::span<const double> values);
double zscore_apply(double x, const NormStats& stats);
double zscore_invert(double normalized, const NormStats& stats);
std::vector<double> zscore_apply(std::span<const double> values, const NormStats& stats);

struct SlotSeries {
  int node_id = 0;
  long start_slot = 0;
  std::vector<double> values;
};

// Per-slot median of the node's reports over [start, start + length). Empty
// slots repeat the previous value; an empty first slot uses `initial_ms`.
// `node_reports` may be in any order.
SlotSeries make_node_series(std::span<const DelayReport> node_reports,
                            int node_id,
                            long start,
                            long length,
                            double initial_ms = 20.0);

double median(std::vector<double> values);

}  // namespace fedgru::traces
