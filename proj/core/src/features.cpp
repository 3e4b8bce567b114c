#include "polreeb/features.hpp"

#include <algorithm>
#include <cmath>

#include "polreeb/error.hpp"

namespace polreeb {
namespace {

struct BearingSum {
  double x = 0.0, y = 0.0;
  void add(double deg) {
    x += std::cos(deg_to_rad(deg));
    y += std::sin(deg_to_rad(deg));
  }
  std::optional<double> mean() const {
    if (std::hypot(x, y) < 1e-9) return std::nullopt;
    const double b = std::fmod(rad_to_deg(std::atan2(y, x)) + 360.0, 360.0);
    return b >= 360.0 ? 0.0 : b;
  }
};

double p95(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(v.size())));
  return v[std::max<std::size_t>(rank, 1) - 1];
}

Mode classify(double speed, const ModeThresholds& t) {
  if (speed <= t.walk_max_mps) return Mode::kWalk;
  if (speed <= t.bike_max_mps) return Mode::kBike;
  return Mode::kCar;
}

// Longest and summed overlap of `stops` with [a, b].
void stop_overlap(std::span<const Stop> stops, std::int64_t a, std::int64_t b, NodeFeatures& f) {
  auto it = std::lower_bound(stops.begin(), stops.end(), a,
                             [](const Stop& s, std::int64_t v) { return s.t_end < v; });
  for (; it != stops.end() && it->t_start <= b; ++it) {
    const auto overlap = static_cast<double>(std::min(it->t_end, b) - std::max(it->t_start, a));
    if (overlap <= 0.0) continue;
    f.max_stop_duration_s = std::max(f.max_stop_duration_s, overlap);
    f.dwell_total_s += overlap;
  }
}

}  // namespace

void StopParams::validate() const {
  if (!(v_stop_mps > 0.0) || !(min_stop_s > 0.0) || !(stop_radius_m > 0.0)) {
    throw Error("stop parameters must be positive");
  }
}

std::vector<Stop> detect_stops(std::span<const TimedPoint> pts, const StopParams& p) {
  p.validate();
  std::vector<Stop> out;
  const std::size_t n = pts.size();
  std::size_t i = 0;
  while (i < n) {
    double lat = pts[i].pos.lat_deg, lon = pts[i].pos.lon_deg;
    std::size_t j = i;
    bool speed_break = false;
    while (j + 1 < n) {
      const TimedPoint& a = pts[j];
      const TimedPoint& b = pts[j + 1];
      if (speed_mps(a, b) >= p.v_stop_mps) {
        speed_break = true;
        break;
      }
      const auto k = static_cast<double>(j - i + 1);
      if (haversine_m({lat / k, lon / k}, b.pos) > p.stop_radius_m) break;
      lat += b.pos.lat_deg;
      lon += b.pos.lon_deg;
      ++j;
    }
    const auto k = static_cast<double>(j - i + 1);
    if (static_cast<double>(pts[j].t - pts[i].t) >= p.min_stop_s) {
      out.push_back({pts[i].t, pts[j].t, {lat / k, lon / k}});
      i = j + 1;
    } else {
      // A fast hop bounds every run starting inside (i, j]; a drift break does not.
      i = speed_break ? j + 1 : i + 1;
    }
  }
  return out;
}

std::vector<Stop> detect_stops(const SubTrajectory& st, const StopParams& p) {
  return detect_stops(std::span<const TimedPoint>(st.points), p);
}

ModeSet estimate_mode(std::span<const std::vector<double>> segment_speeds, double v_moving_mps,
                      const ModeThresholds& t) {
  ModeSet modes;
  std::vector<double> moving;
  for (const auto& seg : segment_speeds) {
    moving.clear();
    for (double v : seg) {
      if (v >= v_moving_mps) moving.push_back(v);
    }
    if (!moving.empty()) modes.insert(classify(p95(moving), t));
  }
  return modes;
}

ModeSet estimate_mode(std::span<const double> speeds, double v_moving_mps, const ModeThresholds& t) {
  const std::vector<std::vector<double>> one{std::vector<double>(speeds.begin(), speeds.end())};
  return estimate_mode(std::span<const std::vector<double>>(one), v_moving_mps, t);
}

ReebGraph annotate_features(ReebGraph g, std::span<const GridTrack> tracks, const StopParams& p,
                            const ModeThresholds& mt) {
  p.validate();
  if (tracks.size() != g.tracks.size()) throw Error("track set does not match graph");

  // Stops per track on contiguous present runs, in grid time.
  std::vector<std::vector<Stop>> stops(tracks.size());
  std::vector<TimedPoint> run;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const GridTrack& tr = tracks[i];
    if (tr.stride_s != g.stride_s) throw Error("grid mismatch");
    run.clear();
    for (std::int64_t s = tr.first_slot; s <= tr.last_slot() + 1; ++s) {
      if (tr.present_at(s)) {
        run.push_back({tr.grid_time(s), tr.at(s)});
        continue;
      }
      if (!run.empty()) {
        auto found = detect_stops(std::span<const TimedPoint>(run), p);
        stops[i].insert(stops[i].end(), found.begin(), found.end());
        run.clear();
      }
    }
  }

  std::vector<std::vector<double>> seg_speeds;
  for (ReebNode& node : g.nodes) {
    NodeFeatures f;
    BearingSum bearing;
    double lat = 0.0, lon = 0.0, count = 0.0;
    seg_speeds.assign(node.members.size(), {});
    const std::int64_t s0 = node.t_start / g.stride_s;
    const std::int64_t s1 = node.t_end / g.stride_s;
    for (std::size_t mi = 0; mi < node.members.size(); ++mi) {
      const GridTrack& tr = tracks[node.members[mi]];
      const GeoPoint* prev = nullptr;
      for (std::int64_t s = s0; s <= s1; ++s) {
        if (!tr.present_at(s)) {
          prev = nullptr;
          continue;
        }
        const GeoPoint& q = tr.at(s);
        lat += q.lat_deg;
        lon += q.lon_deg;
        count += 1.0;
        if (prev != nullptr) {
          const double v = haversine_m(*prev, q) / static_cast<double>(g.stride_s);
          f.max_velocity_mps = std::max(f.max_velocity_mps, v);
          seg_speeds[mi].push_back(v);
          if (v >= p.v_stop_mps && !(*prev == q)) bearing.add(bearing_deg(*prev, q));
        }
        prev = &q;
      }
      stop_overlap(stops[node.members[mi]], node.t_start, node.t_end, f);
    }
    if (count > 0.0) f.anchor = {lat / count, lon / count};
    f.modes = estimate_mode(std::span<const std::vector<double>>(seg_speeds), p.v_stop_mps, mt);
    f.mean_bearing_deg = bearing.mean();
    node.features = f;
  }
  return g;
}

NodeFeatures features_from_path(const ReebNode& node, const StopParams& p, const ModeThresholds& mt) {
  NodeFeatures f;
  const auto& path = node.centroid_path;
  if (path.empty()) return f;
  if (path.size() == 1) {
    f.anchor = path.front().pos;
    return f;
  }
  BearingSum bearing;
  std::vector<double> speeds;
  double lat = 0.0, lon = 0.0, wsum = 0.0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const double left = i > 0 ? static_cast<double>(path[i].t - path[i - 1].t) : 0.0;
    const double right = i + 1 < path.size() ? static_cast<double>(path[i + 1].t - path[i].t) : 0.0;
    const double w = 0.5 * (left + right);
    lat += w * path[i].pos.lat_deg;
    lon += w * path[i].pos.lon_deg;
    wsum += w;
    if (i > 0) {
      const double v = speed_mps(path[i - 1], path[i]);
      f.max_velocity_mps = std::max(f.max_velocity_mps, v);
      speeds.push_back(v);
      if (v >= p.v_stop_mps && !(path[i - 1].pos == path[i].pos)) {
        bearing.add(bearing_deg(path[i - 1].pos, path[i].pos));
      }
    }
  }
  f.anchor = {lat / wsum, lon / wsum};
  const auto stops = detect_stops(std::span<const TimedPoint>(path), p);
  stop_overlap(stops, node.t_start, node.t_end, f);
  f.modes = estimate_mode(std::span<const double>(speeds), p.v_stop_mps, mt);
  f.mean_bearing_deg = bearing.mean();
  return f;
}

double graph_diameter_m(const ReebGraph& g) {
  if (!g.annotated()) throw Error("features required");
  double best = 0.0;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < g.nodes.size(); ++j) {
      best = std::max(best, haversine_m(g.nodes[i].features->anchor, g.nodes[j].features->anchor));
    }
  }
  return best;
}

}  // namespace polreeb
