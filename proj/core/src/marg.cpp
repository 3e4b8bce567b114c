#include "polreeb/marg.hpp"

#include <algorithm>
#include <map>
#include <ostream>

#include "polreeb/error.hpp"
#include "polreeb/terg.hpp"

namespace polreeb {
namespace {

void describe(ReebNode& n, const MargConfig& cfg) {
  n.support = static_cast<std::uint32_t>(n.members.size());
  n.features = features_from_path(n, cfg.stop, cfg.modes);
}

// A maximal run of slots where the newcomer is present and touches exactly
// the same set of nodes.
struct Run {
  std::int64_t first_slot = 0;
  std::int64_t last_slot = 0;
  std::vector<std::uint32_t> nodes;  // ids in the pre-update graph, sorted
};

ReebNode slice(const ReebNode& src, std::int64_t t_start, std::int64_t t_end, std::int64_t rep) {
  ReebNode n;
  n.members = src.members;
  n.t_start = t_start;
  n.t_end = t_end;
  for (std::int64_t t : representative_times(t_start, t_end, rep)) {
    n.centroid_path.push_back({t, *edge_position_at(src, t)});
  }
  return n;
}

}  // namespace

void MargConfig::validate() const {
  if (initial_cohort_M < 1) throw Error("initial_cohort_M must be >= 1");
  if (min_support < 1) throw Error("min_support must be >= 1");
  if (stop_gate_s < 0.0) throw Error("stop_gate_s must be >= 0");
  if (stride_s < 1) throw Error("stride_s must be >= 1");
  epsilon.validate();
  stop.validate();
}

std::vector<PseudoTrack> gate_nodes(const ReebGraph& terg, double stop_gate_s, std::int64_t stride_s) {
  if (!terg.annotated()) throw Error("features required");
  std::vector<PseudoTrack> out;
  for (const ReebNode& n : terg.nodes) {
    if (n.features->max_stop_duration_s < stop_gate_s) continue;
    const std::int64_t first = floor_div(n.t_start + stride_s - 1, stride_s);
    const std::int64_t last = floor_div(n.t_end, stride_s);
    if (last < first) continue;
    PseudoTrack pt;
    const TrackInfo& src = terg.tracks.at(n.members.front());
    pt.info = {src.agent_id, -1, 0, static_cast<std::int64_t>(n.id)};
    pt.track.agent_id = src.agent_id;
    pt.track.day_index = -1;
    pt.track.stride_s = stride_s;
    pt.track.first_slot = first;
    for (std::int64_t s = first; s <= last; ++s) {
      pt.track.pos.push_back(*edge_position_at(n, s * stride_s));
      pt.track.present.push_back(1);
    }
    out.push_back(std::move(pt));
  }
  return out;
}

std::vector<PseudoTrack> raw_contribution(std::span<const GridTrack> tracks) {
  std::vector<PseudoTrack> out;
  out.reserve(tracks.size());
  for (const GridTrack& t : tracks) out.push_back({t, {t.agent_id, t.day_index, t.day_start, -1}});
  return out;
}

void mark_low_support(ReebGraph& g, std::uint32_t min_support) {
  for (ReebNode& n : g.nodes) n.low_support = n.support < min_support;
}

ReebGraph build_initial_marg(std::span<const AgentContribution> cohort, const MargConfig& cfg) {
  cfg.validate();
  std::vector<GridTrack> pool;
  std::vector<TrackInfo> infos;
  for (const AgentContribution& a : cohort) {
    for (const PseudoTrack& t : a.tracks) {
      if (t.track.stride_s != cfg.stride_s) throw Error("grid mismatch");
      if (t.track.empty()) continue;
      pool.push_back(t.track);
      infos.push_back(t.info);
    }
  }
  if (pool.empty()) throw Error("empty population model");
  ReebGraph g = assemble_reeb_graph(pool, cfg.epsilon, GraphKind::kPopulationMarg,
                                    TergOptions{cfg.stride_s});
  g.tracks = std::move(infos);
  for (ReebNode& n : g.nodes) describe(n, cfg);
  mark_low_support(g, cfg.min_support);
  return g;
}

ReebGraph update_reeb(ReebGraph g, const PseudoTrack& pt, const MargConfig& cfg, UpdateReport* report) {
  const GridTrack& T = pt.track;
  if (T.empty() || std::none_of(T.present.begin(), T.present.end(), [](auto p) { return p != 0; })) {
    throw Error("empty input");
  }
  if (T.stride_s != g.stride_s) throw Error("grid mismatch");
  const std::int64_t stride = g.stride_s;
  const auto newcomer = static_cast<TrackId>(g.tracks.size());

  // Scan: nodes are ordered by t_start (canonical form), so a single sweep
  // keeps the set of nodes whose interval covers the current slot.
  std::vector<std::uint32_t> order(g.nodes.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return g.nodes[a].t_start < g.nodes[b].t_start;
  });
  std::vector<std::uint8_t> connected(g.nodes.size(), 0);
  std::vector<std::uint32_t> active, touching;
  std::vector<Run> runs;
  std::vector<ElementEvent> events;
  std::size_t next = 0;
  for (std::int64_t s = T.first_slot; s <= T.last_slot(); ++s) {
    const std::int64_t t = s * stride;
    while (next < order.size() && g.nodes[order[next]].t_start <= t) active.push_back(order[next++]);
    std::erase_if(active, [&](std::uint32_t v) {
      if (g.nodes[v].t_end >= t) return false;
      if (connected[v]) {
        events.push_back({EventKind::kDisconnect, t, v});
        connected[v] = 0;
      }
      return true;
    });
    const bool present = T.present_at(s);
    touching.clear();
    for (std::uint32_t v : active) {
      bool now = false;
      if (present) {
        const auto pe = edge_position_at(g.nodes[v], t);
        now = pe && distance(cfg.epsilon.metric, T.at(s), *pe) < cfg.epsilon.epsilon;
      }
      if (now != static_cast<bool>(connected[v])) {
        events.push_back({now ? EventKind::kConnect : EventKind::kDisconnect, t, v});
        connected[v] = now ? 1 : 0;
      }
      if (now) touching.push_back(v);
    }
    if (!present) continue;
    std::sort(touching.begin(), touching.end());
    if (!runs.empty() && runs.back().last_slot == s - 1 && runs.back().nodes == touching) {
      runs.back().last_slot = s;
    } else {
      runs.push_back({s, s, touching});
    }
  }

  // Rewrite: split touched nodes around their runs, then add one node per run.
  std::vector<std::vector<std::size_t>> runs_of(g.nodes.size());
  for (std::size_t r = 0; r < runs.size(); ++r) {
    for (std::uint32_t v : runs[r].nodes) runs_of[v].push_back(r);
  }
  std::vector<ReebNode> rebuilt;
  rebuilt.reserve(g.nodes.size() + 2 * runs.size());
  std::size_t touched = 0;
  for (std::uint32_t v = 0; v < g.nodes.size(); ++v) {
    if (runs_of[v].empty()) {
      rebuilt.push_back(std::move(g.nodes[v]));
      continue;
    }
    ++touched;
    const ReebNode& src = g.nodes[v];
    std::int64_t cursor = src.t_start;
    for (std::size_t r : runs_of[v]) {
      const std::int64_t a = runs[r].first_slot * stride;
      if (cursor < a) rebuilt.push_back(slice(src, cursor, a - stride, g.rep_stride_s));
      cursor = runs[r].last_slot * stride + stride;
    }
    if (cursor <= src.t_end) rebuilt.push_back(slice(src, cursor, src.t_end, g.rep_stride_s));
  }
  for (const Run& run : runs) {
    ReebNode n;
    n.t_start = run.first_slot * stride;
    n.t_end = run.last_slot * stride;
    double weight = 1.0;
    for (std::uint32_t v : run.nodes) {
      const ReebNode& src = g.nodes[v];
      n.members.insert(n.members.end(), src.members.begin(), src.members.end());
      weight += static_cast<double>(src.members.size());
    }
    n.members.push_back(newcomer);
    std::sort(n.members.begin(), n.members.end());
    for (std::int64_t t : representative_times(n.t_start, n.t_end, g.rep_stride_s)) {
      const GeoPoint& own = T.at(floor_div(t, stride));
      double lat = own.lat_deg, lon = own.lon_deg;
      for (std::uint32_t v : run.nodes) {
        const GeoPoint p = *edge_position_at(g.nodes[v], t);
        const auto k = static_cast<double>(g.nodes[v].members.size());
        lat += k * p.lat_deg;
        lon += k * p.lon_deg;
      }
      n.centroid_path.push_back({t, {lat / weight, lon / weight}});
    }
    rebuilt.push_back(std::move(n));
  }
  // Untouched nodes were moved out above; only the new ones need describing.
  for (ReebNode& n : rebuilt) {
    if (!n.features) describe(n, cfg);
  }

  g.nodes = std::move(rebuilt);
  g.tracks.push_back(pt.info);
  canonicalize(g);
  mark_low_support(g, cfg.min_support);
  if (report != nullptr) {
    report->events = std::move(events);
    report->touched_nodes = touched;
  }
  return g;
}

ReebGraph build_marg(std::span<const AgentContribution> agents, const MargConfig& cfg) {
  cfg.validate();
  const std::size_t m = std::min(cfg.initial_cohort_M, agents.size());
  ReebGraph g = build_initial_marg(agents.first(m), cfg);
  for (const AgentContribution& a : agents.subspan(m)) {
    for (const PseudoTrack& t : a.tracks) {
      if (std::none_of(t.track.present.begin(), t.track.present.end(), [](auto p) { return p != 0; })) continue;
      g = update_reeb(std::move(g), t, cfg);
    }
  }
  mark_low_support(g, cfg.min_support);
  return g;
}

void write_marg_stats(std::ostream& os, const ReebGraph& g) {
  std::map<std::uint32_t, std::size_t> support;
  std::map<std::int64_t, std::size_t> hours;
  std::map<std::size_t, std::size_t> carried;
  std::size_t low = 0;
  for (const ReebNode& n : g.nodes) {
    ++support[n.support];
    ++hours[(n.t_end - n.t_start) / 3600];
    if (n.low_support) ++low;
  }
  for (const ReebEdge& e : g.edges) ++carried[e.carried.size()];
  os << "histogram,bin,count\n";
  os << "summary,nodes," << g.nodes.size() << '\n';
  os << "summary,edges," << g.edges.size() << '\n';
  os << "summary,tracks," << g.tracks.size() << '\n';
  os << "summary,low_support_nodes," << low << '\n';
  for (const auto& [k, v] : support) os << "node_support," << k << ',' << v << '\n';
  for (const auto& [k, v] : hours) os << "node_duration_h," << k << ',' << v << '\n';
  for (const auto& [k, v] : carried) os << "edge_carried," << k << ',' << v << '\n';
}

MargStore::MargStore(ReebGraph initial, MargConfig cfg)
    : cfg_(std::move(cfg)), current_(std::make_shared<const ReebGraph>(std::move(initial))) {}

std::shared_ptr<const ReebGraph> MargStore::snapshot() const {
  std::lock_guard lock(publish_);
  return current_;
}

void MargStore::add(const PseudoTrack& t) {
  std::lock_guard writer(writer_);
  auto next = std::make_shared<const ReebGraph>(update_reeb(*snapshot(), t, cfg_));
  std::lock_guard lock(publish_);
  current_ = std::move(next);
}

}  // namespace polreeb
