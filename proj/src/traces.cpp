#include "fedgru/traces.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "fedgru/errors.h"
#include "fedgru/rng.h"

namespace fedgru::traces {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<double> to_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = line.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + 1;
  }
  return out;
}

// Local plane coordinates (km) relative to `ref`.
struct PlaneXY {
  double north = 0.0;
  double east = 0.0;
};

PlaneXY to_plane(const GeoPoint& ref, const GeoPoint& p) {
  return {(p.lat - ref.lat) * kDegToRad * kEarthRadiusKm,
          (p.lon - ref.lon) * kDegToRad * kEarthRadiusKm * std::cos(ref.lat * kDegToRad)};
}

std::size_t nearest(const GeoPoint& p, std::span<const GeoPoint> nodes) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double d = haversine_km(p, nodes[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  const double dlat = (b.lat - a.lat) * kDegToRad;
  const double dlon = (b.lon - a.lon) * kDegToRad;
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  const double h = s1 * s1 + std::cos(a.lat * kDegToRad) * std::cos(b.lat * kDegToRad) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

GeoPoint offset_km(const GeoPoint& origin, double north_km, double east_km) {
  const double lat = origin.lat + north_km / kEarthRadiusKm / kDegToRad;
  const double lon =
      origin.lon + east_km / (kEarthRadiusKm * std::cos(origin.lat * kDegToRad)) / kDegToRad;
  return {lat, lon};
}

TraceParseResult parse_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read trace file " + path.string());

  TraceParseResult result;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    const auto view = trim(line);
    if (view.empty()) {
      first = false;
      continue;
    }
    const auto fields = split(view, ',');
    const bool was_first = first;
    first = false;
    if (fields.size() != 4) {
      ++result.skipped_rows;
      continue;
    }
    const auto id = trim(fields[0]);
    const auto ts = to_double(fields[1]);
    const auto lat = to_double(fields[2]);
    const auto lon = to_double(fields[3]);
    if (!ts || !lat || !lon) {
      // A non-numeric first line is a header, not a malformed row.
      if (!(was_first && !ts && !lat && !lon)) ++result.skipped_rows;
      continue;
    }
    if (id.empty() || *lat < -90.0 || *lat > 90.0 || *lon < -180.0 || *lon > 180.0) {
      ++result.skipped_rows;
      continue;
    }
    result.points.push_back({std::string(id), *ts, *lat, *lon});
  }
  if (in.bad()) throw DataError("I/O error while reading " + path.string());
  if (result.points.empty()) throw DataError("no usable trace data");

  std::stable_sort(result.points.begin(), result.points.end(),
                   [](const RawTracePoint& a, const RawTracePoint& b) {
                     if (a.vehicle_id != b.vehicle_id) return a.vehicle_id < b.vehicle_id;
                     return a.timestamp < b.timestamp;
                   });
  return result;
}

std::vector<RawTracePoint> synthesize_mobility(const MobilityConfig& config) {
  if (config.slot_len_s <= 0.0) throw ConfigError("slot_len must be positive");
  if (config.area_km <= 0.0) throw ConfigError("area_km must be positive");
  if (config.slots < 1) throw ConfigError("slots must be at least 1");
  if (config.min_speed_mps <= 0.0 || config.max_speed_mps < config.min_speed_mps)
    throw ConfigError("speed range must satisfy 0 < min_speed <= max_speed");
  if (config.active_prob < 0.0 || config.active_prob > 1.0)
    throw ConfigError("active_prob must lie in [0,1]");

  std::vector<RawTracePoint> points;
  points.reserve(config.vehicles * static_cast<std::size_t>(config.slots));
  const double step_km_per_mps = config.slot_len_s / 1000.0;

  for (std::size_t v = 0; v < config.vehicles; ++v) {
    auto rng = derive_rng(config.seed, {stream::kMobility, v});
    char name[32];
    std::snprintf(name, sizeof(name), "v%04zu", v);

    double x = uniform(rng, 0.0, config.area_km);
    double y = uniform(rng, 0.0, config.area_km);
    double wx = uniform(rng, 0.0, config.area_km);
    double wy = uniform(rng, 0.0, config.area_km);
    double speed = uniform(rng, config.min_speed_mps, config.max_speed_mps);

    for (long s = 0; s < config.slots; ++s) {
      const bool active = uniform(rng, 0.0, 1.0) < config.active_prob;
      if (active) {
        const auto p = offset_km(config.origin, y, x);
        points.push_back({name,
                          config.start_time + (static_cast<double>(s) + 0.5) * config.slot_len_s,
                          p.lat, p.lon});
      }
      double budget = speed * step_km_per_mps;
      while (budget > 0.0) {
        const double dx = wx - x;
        const double dy = wy - y;
        const double dist = std::hypot(dx, dy);
        if (dist <= budget) {
          x = wx;
          y = wy;
          budget -= dist;
          wx = uniform(rng, 0.0, config.area_km);
          wy = uniform(rng, 0.0, config.area_km);
          speed = uniform(rng, config.min_speed_mps, config.max_speed_mps);
          if (dist == 0.0) break;
        } else {
          x += dx / dist * budget;
          y += dy / dist * budget;
          budget = 0.0;
        }
      }
    }
  }
  return points;
}

namespace {

std::vector<DelayReport> synthesize_from_points(std::span<const RawTracePoint> points,
                                                std::span<const GeoPoint> nodes,
                                                const SynthesisParams& params,
                                                std::optional<double> time_origin) {
  if (params.slot_len_s <= 0.0) throw ConfigError("slot_len must be positive");
  if (nodes.empty()) throw ConfigError("at least one edge node is required");
  if (points.empty()) return {};

  const double t0 = time_origin.value_or(
      std::min_element(points.begin(), points.end(), [](const auto& a, const auto& b) {
        return a.timestamp < b.timestamp;
      })->timestamp);

  // (slot, vehicle) -> index of the latest fix in that slot.
  std::map<std::pair<long, std::string>, std::size_t> latest;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    const long slot = static_cast<long>(std::floor((p.timestamp - t0) / params.slot_len_s));
    if (slot < 0) continue;
    auto [it, inserted] = latest.try_emplace({slot, p.vehicle_id}, i);
    if (!inserted && points[it->second].timestamp <= p.timestamp) it->second = i;
  }

  const auto& m = params.model;
  auto rng = derive_rng(params.seed, {stream::kDelayNoise});
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<DelayReport> reports;
  reports.reserve(latest.size());
  for (const auto& [key, idx] : latest) {
    const auto& p = points[idx];
    const GeoPoint pos{p.lat, p.lon};
    const auto node = nearest(pos, nodes);
    const double dist = haversine_km(pos, nodes[node]);
    double delay = m.base_ms + m.per_km_ms * dist;
    if (m.load_amplitude_ms != 0.0 && m.load_period_slots > 0.0) {
      delay += m.load_amplitude_ms *
               std::sin(2.0 * std::numbers::pi * static_cast<double>(key.first) / m.load_period_slots);
    }
    const double n = noise(rng);
    if (m.noise_std_ms > 0.0) delay += m.noise_std_ms * n;
    delay = std::max(delay, m.min_ms);
    reports.push_back({key.second, key.first, static_cast<int>(node) + 1, delay, false, pos});
  }
  return reports;
}

}  // namespace

std::vector<DelayReport> synthesize_delays(std::span<const RawTracePoint> points,
                                           std::span<const GeoPoint> nodes,
                                           const SynthesisParams& params) {
  return synthesize_from_points(points, nodes, params, std::nullopt);
}

std::vector<DelayReport> synthesize_delays(const MobilityConfig& mobility,
                                           std::span<const GeoPoint> nodes,
                                           const SynthesisParams& params) {
  if (params.slot_len_s <= 0.0) throw ConfigError("slot_len must be positive");
  auto cfg = mobility;
  cfg.slot_len_s = params.slot_len_s;
  const auto points = synthesize_mobility(cfg);
  return synthesize_from_points(points, nodes, params, cfg.start_time);
}

std::vector<GeoPoint> area_grid(const GeoPoint& origin, double area_km, std::size_t per_side) {
  std::vector<GeoPoint> grid;
  grid.reserve(per_side * per_side);
  const double cell = area_km / static_cast<double>(per_side);
  for (std::size_t i = 0; i < per_side; ++i)
    for (std::size_t j = 0; j < per_side; ++j)
      grid.push_back(offset_km(origin, (static_cast<double>(i) + 0.5) * cell,
                               (static_cast<double>(j) + 0.5) * cell));
  return grid;
}

std::vector<GeoPoint> place_edge_nodes(std::span<const GeoPoint> sample, std::size_t count) {
  if (count == 0) return {};
  if (sample.empty()) throw DataError("cannot place edge nodes without sample points");

  const GeoPoint ref = sample.front();
  std::vector<PlaneXY> xy;
  xy.reserve(sample.size());
  for (const auto& p : sample) xy.push_back(to_plane(ref, p));

  auto d2 = [](const PlaneXY& a, const PlaneXY& b) {
    const double dn = a.north - b.north;
    const double de = a.east - b.east;
    return dn * dn + de * de;
  };

  // Farthest-point seeding from the point nearest the centroid.
  PlaneXY centroid;
  for (const auto& p : xy) {
    centroid.north += p.north;
    centroid.east += p.east;
  }
  centroid.north /= static_cast<double>(xy.size());
  centroid.east /= static_cast<double>(xy.size());

  std::vector<PlaneXY> centers;
  std::size_t first = 0;
  for (std::size_t i = 1; i < xy.size(); ++i)
    if (d2(xy[i], centroid) < d2(xy[first], centroid)) first = i;
  centers.push_back(xy[first]);
  std::vector<double> closest(xy.size());
  for (std::size_t i = 0; i < xy.size(); ++i) closest[i] = d2(xy[i], centers[0]);
  while (centers.size() < count) {
    const auto far = static_cast<std::size_t>(
        std::max_element(closest.begin(), closest.end()) - closest.begin());
    centers.push_back(xy[far]);
    for (std::size_t i = 0; i < xy.size(); ++i) closest[i] = std::min(closest[i], d2(xy[i], xy[far]));
  }

  std::vector<std::size_t> label(xy.size());
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < xy.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < centers.size(); ++c)
        if (d2(xy[i], centers[c]) < d2(xy[i], centers[best])) best = c;
      if (iter == 0 || best != label[i]) changed = true;
      label[i] = best;
    }
    if (!changed) break;
    std::vector<PlaneXY> sum(centers.size());
    std::vector<std::size_t> n(centers.size(), 0);
    for (std::size_t i = 0; i < xy.size(); ++i) {
      sum[label[i]].north += xy[i].north;
      sum[label[i]].east += xy[i].east;
      ++n[label[i]];
    }
    for (std::size_t c = 0; c < centers.size(); ++c)
      if (n[c] > 0)
        centers[c] = {sum[c].north / static_cast<double>(n[c]), sum[c].east / static_cast<double>(n[c])};
  }

  std::vector<GeoPoint> out;
  out.reserve(centers.size());
  for (const auto& c : centers) out.push_back(offset_km(ref, c.north, c.east));
  return out;
}

std::vector<int> assign_vehicles_to_nodes(std::span<DelayReport> reports,
                                          std::size_t cluster_size,
                                          std::span<const GeoPoint> local_nodes,
                                          std::uint64_t seed) {
  if (cluster_size < 2)
    throw ConfigError("cluster_size must be at least 2 (one local node plus the global node)");
  const std::size_t locals = cluster_size - 1;
  const bool by_position = local_nodes.size() >= locals;
  const auto nodes = local_nodes.first(by_position ? locals : 0);

  std::map<std::string, int> round_robin;
  {
    std::vector<std::string> ids;
    for (const auto& r : reports) ids.push_back(r.vehicle_id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    auto rng = derive_rng(seed, {stream::kAssignment});
    std::shuffle(ids.begin(), ids.end(), rng);
    for (std::size_t i = 0; i < ids.size(); ++i)
      round_robin[ids[i]] = static_cast<int>(i % locals) + 1;
  }

  std::vector<int> out(reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    auto& r = reports[i];
    if (by_position && r.position)
      r.node_id = static_cast<int>(nearest(*r.position, nodes)) + 1;
    else
      r.node_id = round_robin.at(r.vehicle_id);
    out[i] = r.node_id;
  }
  return out;
}

NormStats zscore_fit(std::span<const double> values) {
  if (values.empty()) throw DataError("cannot fit normalization on an empty sequence");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / n)};
}

double zscore_apply(double x, const NormStats& stats) {
  if (stats.degenerate()) return 0.0;
  return (x - stats.mean) / stats.std;
}

std::vector<double> zscore_apply(std::span<const double> values, const NormStats& stats) {
  std::vector<double> out(values.size());
  std::transform(values.begin(), values.end(), out.begin(),
                 [&stats](double v) { return zscore_apply(v, stats); });
  return out;
}

double zscore_invert(double normalized, const NormStats& stats) {
  if (stats.degenerate()) throw DataError("cannot invert degenerate normalization");
  return normalized * stats.std + stats.mean;
}

double median(std::vector<double> values) {
  if (values.empty()) throw DataError("median of an empty set");
  const auto n = values.size();
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), mid);
  return lower + (upper - lower) / 2.0;
}

SlotSeries make_node_series(std::span<const DelayReport> node_reports,
                            int node_id,
                            long start,
                            long length,
                            double initial_ms) {
  if (length < 1) throw StructuralError("series window length must be at least 1");
  std::vector<std::vector<double>> buckets(static_cast<std::size_t>(length));
  for (const auto& r : node_reports) {
    if (r.node_id != node_id || r.slot < start || r.slot >= start + length) continue;
    buckets[static_cast<std::size_t>(r.slot - start)].push_back(r.delay_ms);
  }
  SlotSeries series{node_id, start, {}};
  series.values.reserve(buckets.size());
  double previous = initial_ms;
  for (auto& b : buckets) {
    if (!b.empty()) previous = median(std::move(b));
    series.values.push_back(previous);
  }
  return series;
}

}  // namespace fedgru::traces
