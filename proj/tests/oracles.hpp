#pragma once

// Independent brute-force references used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "polreeb/events.hpp"
#include "polreeb/trajectory.hpp"

namespace oracle {

using polreeb::Bundle;
using polreeb::Event;
using polreeb::EventKind;
using polreeb::GeoPoint;
using polreeb::GridTrack;
using polreeb::TrackId;

inline double great_circle_m(const GeoPoint& p, const GeoPoint& q) {
  // Spherical law of cosines in vector form, independent of the haversine code.
  const double r = 6'371'000.0;
  auto unit = [](const GeoPoint& g) {
    const double la = g.lat_deg * std::numbers::pi / 180.0;
    const double lo = g.lon_deg * std::numbers::pi / 180.0;
    return std::array<double, 3>{std::cos(la) * std::cos(lo), std::cos(la) * std::sin(lo), std::sin(la)};
  };
  const auto a = unit(p);
  const auto b = unit(q);
  const double cx = a[1] * b[2] - a[2] * b[1];
  const double cy = a[2] * b[0] - a[0] * b[2];
  const double cz = a[0] * b[1] - a[1] * b[0];
  const double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
  return r * std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz), dot);
}

// All pairs (i < j) strictly closer than eps under the given distance.
template <class Dist>
std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs_within(const std::vector<GeoPoint>& pts, double eps,
                                                                  Dist dist) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  for (std::uint32_t i = 0; i < pts.size(); ++i) {
    for (std::uint32_t j = i + 1; j < pts.size(); ++j) {
      if (dist(pts[i], pts[j]) < eps) out.emplace_back(i, j);
    }
  }
  return out;
}

// Components by repeated label relaxation over the full pair list.
inline std::vector<std::set<TrackId>> components(const std::vector<TrackId>& ids,
                                                 const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges) {
  std::vector<std::uint32_t> label(ids.size());
  for (std::uint32_t i = 0; i < ids.size(); ++i) label[i] = i;
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& [i, j] : edges) {
      const std::uint32_t m = std::min(label[i], label[j]);
      if (label[i] != m || label[j] != m) {
        label[i] = label[j] = m;
        changed = true;
      }
    }
  }
  std::map<std::uint32_t, std::set<TrackId>> by;
  for (std::uint32_t i = 0; i < ids.size(); ++i) by[label[i]].insert(ids[i]);
  std::vector<std::set<TrackId>> out;
  for (auto& [l, s] : by) out.push_back(std::move(s));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return *a.begin() < *b.begin(); });
  return out;
}

struct TimelineResult {
  std::vector<Bundle> bundles;
  std::vector<Event> events;
};

// Per-slot recomputation of every component with all-pairs distances, then
// bundles and events read off consecutive snapshots.
template <class Dist>
TimelineResult brute_timeline(const std::vector<GridTrack>& tracks, double eps, Dist dist) {
  TimelineResult out;
  if (tracks.empty()) return out;
  const std::int64_t stride = tracks.front().stride_s;
  std::int64_t lo = INT64_MAX, hi = INT64_MIN;
  for (const auto& t : tracks) {
    if (t.empty()) continue;
    lo = std::min(lo, t.first_slot);
    hi = std::max(hi, t.last_slot());
  }
  if (lo > hi) return out;

  std::vector<std::set<TrackId>> prev;
  std::vector<std::size_t> prev_bundle;
  std::set<TrackId> prev_present;
  for (std::int64_t k = lo; k <= hi + 1; ++k) {
    std::vector<TrackId> ids;
    std::vector<GeoPoint> pts;
    for (TrackId i = 0; i < tracks.size(); ++i) {
      if (tracks[i].present_at(k)) {
        ids.push_back(i);
        pts.push_back(tracks[i].at(k));
      }
    }
    const auto cur = components(ids, pairs_within(pts, eps, dist));
    const std::set<TrackId> present(ids.begin(), ids.end());
    const std::int64_t t = k * stride;

    auto find_in = [](const std::vector<std::set<TrackId>>& cs, TrackId id) -> std::int64_t {
      for (std::size_t c = 0; c < cs.size(); ++c) {
        if (cs[c].contains(id)) return static_cast<std::int64_t>(c);
      }
      return -1;
    };
    // Groups `members` by their component in `other`; members not found there
    // are singleton parts. Emits k - 1 events if any part is found in `other`.
    auto emit_parts = [&](const std::set<TrackId>& members, const std::vector<std::set<TrackId>>& other,
                          EventKind kind, std::vector<Event>& sink) {
      std::map<std::int64_t, TrackId> part_min;
      bool any = false;
      std::int64_t fresh = -1;
      for (TrackId id : members) {
        const std::int64_t c = find_in(other, id);
        const std::int64_t key = c >= 0 ? c : fresh--;
        any = any || c >= 0;
        auto it = part_min.find(key);
        if (it == part_min.end()) part_min[key] = id;
        else it->second = std::min(it->second, id);
      }
      if (!any || part_min.size() < 2) return;
      std::vector<TrackId> mins;
      for (auto& [key, m] : part_min) mins.push_back(m);
      std::sort(mins.begin(), mins.end());
      for (std::size_t i = 1; i < mins.size(); ++i) sink.push_back({kind, t, {mins[0], mins[i]}});
    };

    std::vector<Event> appear, conn, disc, gone;
    for (TrackId id : present) {
      if (!prev_present.contains(id)) appear.push_back({EventKind::kAppear, t, {id}});
    }
    for (TrackId id : prev_present) {
      if (!present.contains(id)) gone.push_back({EventKind::kDisappear, t, {id}});
    }
    std::vector<std::size_t> cur_bundle(cur.size());
    for (std::size_t c = 0; c < cur.size(); ++c) {
      const auto it = std::find(prev.begin(), prev.end(), cur[c]);
      if (it != prev.end()) {
        cur_bundle[c] = prev_bundle[static_cast<std::size_t>(it - prev.begin())];
        out.bundles[cur_bundle[c]].t_end = t;
      } else {
        cur_bundle[c] = out.bundles.size();
        out.bundles.push_back({std::vector<TrackId>(cur[c].begin(), cur[c].end()), t, t});
        emit_parts(cur[c], prev, EventKind::kConnect, conn);
      }
    }
    for (const auto& p : prev) {
      if (std::find(cur.begin(), cur.end(), p) == cur.end()) emit_parts(p, cur, EventKind::kDisconnect, disc);
    }
    auto by_participants = [](const Event& a, const Event& b) { return a.participants < b.participants; };
    std::sort(conn.begin(), conn.end(), by_participants);
    std::sort(disc.begin(), disc.end(), by_participants);
    for (auto* v : {&appear, &conn, &disc, &gone}) out.events.insert(out.events.end(), v->begin(), v->end());
    prev = cur;
    prev_bundle = cur_bundle;
    prev_present = present;
  }
  std::sort(out.bundles.begin(), out.bundles.end(), [](const Bundle& a, const Bundle& b) {
    return a.t_start != b.t_start ? a.t_start < b.t_start : a.members.front() < b.members.front();
  });
  return out;
}

// Random walkers on a shared grid with occasional absences, packed tightly
// enough around a common center that groups form and break frequently.
inline std::vector<GridTrack> random_tracks(std::mt19937_64& rng, std::size_t max_tracks, std::int64_t max_len,
                                            double spread_m = 150.0, double step_m = 25.0) {
  std::uniform_int_distribution<std::size_t> n_dist(1, max_tracks);
  const std::size_t n = n_dist(rng);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<std::int64_t> len_dist(1, max_len);
  std::uniform_int_distribution<std::int64_t> start_dist(0, max_len / 2);
  std::bernoulli_distribution gap(0.03);
  const GeoPoint center{40.0, -75.0};
  std::vector<GridTrack> out;
  for (std::size_t i = 0; i < n; ++i) {
    GridTrack t;
    t.agent_id = "a";
    t.day_index = static_cast<std::int32_t>(i);
    t.stride_s = 60;
    t.first_slot = start_dist(rng);
    const std::int64_t len = len_dist(rng);
    double e = u(rng) * spread_m, no = u(rng) * spread_m;
    bool absent = false;
    for (std::int64_t k = 0; k < len; ++k) {
      e = std::clamp(e + u(rng) * step_m, -spread_m, spread_m);
      no = std::clamp(no + u(rng) * step_m, -spread_m, spread_m);
      if (gap(rng)) absent = !absent;
      t.pos.push_back(polreeb::offset_m(center, e, no));
      t.present.push_back(absent ? 0 : 1);
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace oracle
