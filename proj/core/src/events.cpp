#include "polreeb/events.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "polreeb/error.hpp"

namespace polreeb {
namespace {

class UnionFind {
 public:
  void reset(std::size_t n) {
    parent_.resize(n);
    std::iota(parent_.begin(), parent_.end(), 0U);
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Keep the smaller index as root so roots identify the smallest member.
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::uint32_t> parent_;
};

void check_same_grid(std::span<const GridTrack> tracks) {
  for (const GridTrack& t : tracks) {
    if (t.stride_s != tracks.front().stride_s) throw Error("grid mismatch");
    if (t.present.size() != t.pos.size()) throw Error("grid mismatch");
  }
}

// Groups ids into parts keyed by `key` (negative keys are singleton parts) and
// emits k - 1 events pairing the first part's smallest id with each other
// part's smallest id, provided at least one part has a non-negative key.
struct PartCollector {
  std::vector<std::pair<std::int64_t, TrackId>> keyed;  // (key, id)
  std::vector<std::pair<TrackId, bool>> part_min;       // (smallest id, carried over)

  void emit(EventKind kind, std::int64_t time, std::vector<Event>& out) {
    std::sort(keyed.begin(), keyed.end());
    part_min.clear();
    bool any_carried = false;
    for (std::size_t i = 0; i < keyed.size(); ++i) {
      const bool singleton = keyed[i].first < 0;
      if (singleton || i == 0 || keyed[i].first != keyed[i - 1].first) {
        part_min.emplace_back(keyed[i].second, !singleton);
        any_carried = any_carried || !singleton;
      } else {
        part_min.back().first = std::min(part_min.back().first, keyed[i].second);
      }
    }
    keyed.clear();
    if (!any_carried || part_min.size() < 2) return;
    std::sort(part_min.begin(), part_min.end());
    for (std::size_t i = 1; i < part_min.size(); ++i) {
      out.push_back({kind, time, {part_min.front().first, part_min[i].first}});
    }
  }
};

}  // namespace

std::string_view to_string(EventKind kind) noexcept {
  switch (kind) {
    case EventKind::kAppear: return "appear";
    case EventKind::kConnect: return "connect";
    case EventKind::kDisconnect: return "disconnect";
    case EventKind::kDisappear: return "disappear";
  }
  return "unknown";
}

std::vector<Event> detect_pair_events(const GridTrack& a, const GridTrack& b,
                                      const EpsilonConfig& cfg, TrackId id_a, TrackId id_b) {
  cfg.validate();
  if (a.stride_s != b.stride_s) throw Error("grid mismatch");
  std::vector<Event> out;
  if (a.empty() || b.empty()) return out;
  const std::vector<TrackId> pair = {std::min(id_a, id_b), std::max(id_a, id_b)};
  const std::int64_t lo = std::min(a.first_slot, b.first_slot);
  const std::int64_t hi = std::max(a.last_slot(), b.last_slot());
  bool connected = false;
  for (std::int64_t k = lo; k <= hi; ++k) {
    const bool now = a.present_at(k) && b.present_at(k) &&
                     distance(cfg.metric, a.at(k), b.at(k)) < cfg.epsilon;
    if (now != connected) {
      out.push_back({now ? EventKind::kConnect : EventKind::kDisconnect, k * a.stride_s, pair});
      connected = now;
    }
  }
  return out;
}

SnapshotGraph snapshot_graph(std::int64_t time,
                             std::span<const std::pair<TrackId, GeoPoint>> positions,
                             const EpsilonConfig& cfg) {
  std::vector<std::pair<TrackId, GeoPoint>> sorted(positions.begin(), positions.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  SnapshotGraph g;
  g.time = time;
  std::vector<GeoPoint> pts;
  pts.reserve(sorted.size());
  for (const auto& [id, p] : sorted) {
    if (!p.valid()) throw Error("invalid position for id " + std::to_string(id));
    g.active.push_back(id);
    pts.push_back(p);
  }
  EpsilonGrid grid(cfg);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> local;
  grid.pairs_within(pts, local);
  g.edges.reserve(local.size());
  for (const auto& [i, j] : local) g.edges.emplace_back(g.active[i], g.active[j]);
  return g;
}

std::vector<std::vector<TrackId>> connected_components(const SnapshotGraph& g) {
  UnionFind uf;
  uf.reset(g.active.size());
  auto local = [&](TrackId id) {
    const auto it = std::lower_bound(g.active.begin(), g.active.end(), id);
    if (it == g.active.end() || *it != id) throw Error("edge endpoint not active");
    return static_cast<std::uint32_t>(it - g.active.begin());
  };
  for (const auto& [a, b] : g.edges) uf.unite(local(a), local(b));
  std::vector<std::vector<TrackId>> comps;
  std::vector<std::int64_t> slot_of_root(g.active.size(), -1);
  for (std::uint32_t i = 0; i < g.active.size(); ++i) {
    const std::uint32_t r = uf.find(i);
    if (slot_of_root[r] < 0) {
      slot_of_root[r] = static_cast<std::int64_t>(comps.size());
      comps.emplace_back();
    }
    comps[static_cast<std::size_t>(slot_of_root[r])].push_back(g.active[i]);
  }
  return comps;
}

Timeline bundle_timeline(std::span<const GridTrack> tracks, const EpsilonConfig& cfg) {
  cfg.validate();
  Timeline out;
  if (tracks.empty()) return out;
  check_same_grid(tracks);
  const std::int64_t stride = tracks.front().stride_s;
  const auto n = static_cast<TrackId>(tracks.size());

  std::vector<TrackId> by_start(n);
  std::iota(by_start.begin(), by_start.end(), 0U);
  std::stable_sort(by_start.begin(), by_start.end(), [&](TrackId x, TrackId y) {
    return tracks[x].first_slot < tracks[y].first_slot;
  });
  std::int64_t max_slot = tracks.front().last_slot();
  for (const GridTrack& t : tracks) {
    if (!t.empty()) max_slot = std::max(max_slot, t.last_slot());
  }

  EpsilonGrid grid(cfg);
  UnionFind uf;
  std::vector<std::int64_t> open_bundle(n, -1);   // bundle holding the id at the previous slot
  std::vector<std::int64_t> comp_of(n, -1);       // component index at the current slot
  std::vector<TrackId> live, active, prev_active;
  std::vector<GeoPoint> pts;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  std::vector<std::vector<TrackId>> comps;
  std::vector<std::int64_t> comp_bundle;          // continued bundle or -1
  std::vector<std::int64_t> root_comp;
  std::vector<std::uint8_t> bundle_continues;
  std::vector<std::int64_t> prev_open_list;       // bundles open at the previous slot
  std::vector<Event> connects, disconnects;
  PartCollector parts;

  std::size_t next_start = 0;
  std::int64_t k = n == 0 ? 0 : tracks[by_start.front()].first_slot;
  for (; k <= max_slot + 1; ++k) {
    std::erase_if(live, [&](TrackId id) { return tracks[id].last_slot() < k; });
    if (prev_active.empty() && live.empty() && next_start < by_start.size()) {
      k = std::max(k, tracks[by_start[next_start]].first_slot);
    }
    bool added = false;
    while (next_start < by_start.size() && tracks[by_start[next_start]].first_slot <= k) {
      if (!tracks[by_start[next_start]].empty()) live.push_back(by_start[next_start]);
      ++next_start;
      added = true;
    }
    if (added) std::sort(live.begin(), live.end());

    active.clear();
    pts.clear();
    for (TrackId id : live) {
      if (tracks[id].present_at(k)) {
        active.push_back(id);
        pts.push_back(tracks[id].at(k));
      }
    }

    // Components of the epsilon graph, ordered by smallest member.
    pairs.clear();
    grid.pairs_within(pts, pairs);
    uf.reset(active.size());
    for (const auto& [i, j] : pairs) uf.unite(i, j);
    comps.clear();
    root_comp.assign(active.size(), -1);
    for (std::uint32_t i = 0; i < active.size(); ++i) {
      const std::uint32_t r = uf.find(i);
      if (root_comp[r] < 0) {
        root_comp[r] = static_cast<std::int64_t>(comps.size());
        comps.emplace_back();
      }
      const auto c = root_comp[r];
      comps[static_cast<std::size_t>(c)].push_back(active[i]);
      comp_of[active[i]] = c;
    }

    // Which components continue an already open bundle unchanged.
    comp_bundle.assign(comps.size(), -1);
    for (std::size_t c = 0; c < comps.size(); ++c) {
      const std::int64_t b = open_bundle[comps[c].front()];
      if (b < 0 || out.bundles[static_cast<std::size_t>(b)].members.size() != comps[c].size()) continue;
      const bool same = std::all_of(comps[c].begin(), comps[c].end(),
                                    [&](TrackId id) { return open_bundle[id] == b; });
      if (same) comp_bundle[c] = b;
    }
    bundle_continues.resize(out.bundles.size());
    for (std::int64_t b : prev_open_list) bundle_continues[static_cast<std::size_t>(b)] = 0;
    for (std::int64_t b : comp_bundle) {
      if (b >= 0) bundle_continues[static_cast<std::size_t>(b)] = 1;
    }

    const std::int64_t t = k * stride;
    // Appear events.
    for (TrackId id : active) {
      if (open_bundle[id] < 0) out.events.push_back({EventKind::kAppear, t, {id}});
    }
    // Connect events: new components assembled from several parts.
    connects.clear();
    for (std::size_t c = 0; c < comps.size(); ++c) {
      if (comp_bundle[c] >= 0) continue;
      for (TrackId id : comps[c]) {
        const std::int64_t key = open_bundle[id] >= 0 ? open_bundle[id] : -1 - static_cast<std::int64_t>(id);
        parts.keyed.emplace_back(key, id);
      }
      parts.emit(EventKind::kConnect, t, connects);
    }
    std::sort(connects.begin(), connects.end(),
              [](const Event& x, const Event& y) { return x.participants < y.participants; });
    out.events.insert(out.events.end(), connects.begin(), connects.end());
    // Disconnect events: previous bundles broken apart.
    disconnects.clear();
    for (std::int64_t b : prev_open_list) {
      if (bundle_continues[static_cast<std::size_t>(b)]) continue;
      for (TrackId id : out.bundles[static_cast<std::size_t>(b)].members) {
        const std::int64_t key = comp_of[id] >= 0 ? comp_of[id] : -1 - static_cast<std::int64_t>(id);
        parts.keyed.emplace_back(key, id);
      }
      parts.emit(EventKind::kDisconnect, t, disconnects);
    }
    std::sort(disconnects.begin(), disconnects.end(),
              [](const Event& x, const Event& y) { return x.participants < y.participants; });
    out.events.insert(out.events.end(), disconnects.begin(), disconnects.end());
    // Disappear events.
    for (TrackId id : prev_active) {
      if (comp_of[id] < 0) out.events.push_back({EventKind::kDisappear, t, {id}});
    }

    // Close finished bundles, open new ones.
    for (std::int64_t b : prev_open_list) {
      if (!bundle_continues[static_cast<std::size_t>(b)]) {
        out.bundles[static_cast<std::size_t>(b)].t_end = (k - 1) * stride;
      }
    }
    for (TrackId id : prev_active) open_bundle[id] = -1;
    prev_open_list.clear();
    for (std::size_t c = 0; c < comps.size(); ++c) {
      std::int64_t b = comp_bundle[c];
      if (b < 0) {
        b = static_cast<std::int64_t>(out.bundles.size());
        out.bundles.push_back({comps[c], t, t});
      }
      prev_open_list.push_back(b);
      for (TrackId id : comps[c]) open_bundle[id] = b;
    }
    for (TrackId id : active) comp_of[id] = -1;
    std::swap(prev_active, active);
  }
  return out;
}

void write_events_jsonl(std::ostream& os, std::span<const Event> events) {
  for (const Event& e : events) {
    os << "{\"kind\":\"" << to_string(e.kind) << "\",\"t\":" << e.time << ",\"participants\":[";
    for (std::size_t i = 0; i < e.participants.size(); ++i) {
      if (i) os << ',';
      os << e.participants[i];
    }
    os << "]}\n";
  }
}

}  // namespace polreeb
