#include "polreeb/reeb_graph.hpp"

#include <algorithm>
#include <map>
#include <tuple>

namespace polreeb {

std::string ModeSet::to_string() const {
  std::string out;
  auto add = [&](Mode m, const char* name) {
    if (!contains(m)) return;
    if (!out.empty()) out += '|';
    out += name;
  };
  add(Mode::kWalk, "walk");
  add(Mode::kBike, "bike");
  add(Mode::kCar, "car");
  return out;
}

bool ReebGraph::annotated() const noexcept {
  return !nodes.empty() &&
         std::all_of(nodes.begin(), nodes.end(), [](const ReebNode& n) { return n.features.has_value(); });
}

void rebuild_edges(ReebGraph& g) {
  std::vector<std::vector<std::uint32_t>> visits(g.tracks.size());
  for (const ReebNode& n : g.nodes) {
    for (TrackId m : n.members) {
      if (m >= visits.size()) visits.resize(m + 1);
      visits[m].push_back(n.id);
    }
  }
  for (auto& v : visits) {
    // Already ordered when the nodes are canonical.
    if (!std::is_sorted(v.begin(), v.end(), [&](auto a, auto b) { return g.nodes[a].t_start < g.nodes[b].t_start; })) {
      std::sort(v.begin(), v.end(), [&](auto a, auto b) { return g.nodes[a].t_start < g.nodes[b].t_start; });
    }
  }
  // Hops bucketed by source node: (to, track).
  std::vector<std::uint32_t> first(g.nodes.size() + 1, 0);
  for (TrackId m = 0; m < visits.size(); ++m) {
    const auto& v = visits[m];
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (g.nodes[v[i - 1]].t_end + g.stride_s == g.nodes[v[i]].t_start) ++first[v[i - 1] + 1];
    }
  }
  for (std::size_t i = 1; i < first.size(); ++i) first[i] += first[i - 1];
  std::vector<std::pair<std::uint32_t, TrackId>> hops(first.back());
  std::vector<std::uint32_t> fill(first.begin(), first.end() - 1);
  for (TrackId m = 0; m < visits.size(); ++m) {
    const auto& v = visits[m];
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (g.nodes[v[i - 1]].t_end + g.stride_s == g.nodes[v[i]].t_start) hops[fill[v[i - 1]]++] = {v[i], m};
    }
  }
  g.edges.clear();
  for (std::uint32_t from = 0; from < g.nodes.size(); ++from) {
    const auto lo = hops.begin() + first[from], hi = hops.begin() + first[from + 1];
    std::sort(lo, hi);
    for (auto it = lo; it != hi; ++it) {
      const auto [to, track] = *it;
      if (g.edges.empty() || g.edges.back().from != from || g.edges.back().to != to) {
        g.edges.push_back({from, to, {}});
      }
      g.edges.back().carried.push_back(track);
    }
  }
}

void canonicalize(ReebGraph& g) {
  std::vector<std::uint32_t> order(g.nodes.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    const ReebNode& x = g.nodes[a];
    const ReebNode& y = g.nodes[b];
    if (x.t_start != y.t_start) return x.t_start < y.t_start;
    return x.members < y.members;
  });
  std::vector<ReebNode> sorted;
  sorted.reserve(g.nodes.size());
  for (std::uint32_t i : order) sorted.push_back(std::move(g.nodes[i]));
  g.nodes = std::move(sorted);
  for (std::size_t i = 0; i < g.nodes.size(); ++i) g.nodes[i].id = static_cast<std::uint32_t>(i);
  rebuild_edges(g);
}

std::vector<std::int64_t> representative_times(std::int64_t t_start, std::int64_t t_end,
                                                std::int64_t rep_stride_s) {
  std::vector<std::int64_t> out{t_start};
  std::int64_t t = (floor_div(t_start, rep_stride_s) + 1) * rep_stride_s;
  for (; t < t_end; t += rep_stride_s) out.push_back(t);
  if (t_end != t_start) out.push_back(t_end);
  return out;
}

std::optional<GeoPoint> edge_position_at(const ReebNode& node, std::int64_t t) {
  const auto& path = node.centroid_path;
  if (path.empty() || t < node.t_start || t > node.t_end) return std::nullopt;
  if (t <= path.front().t) return path.front().pos;
  if (t >= path.back().t) return path.back().pos;
  const auto hi = std::lower_bound(path.begin(), path.end(), t,
                                   [](const TimedPoint& p, std::int64_t v) { return p.t < v; });
  if (hi->t == t) return hi->pos;
  const auto lo = hi - 1;
  return lerp(lo->pos, hi->pos, static_cast<double>(t - lo->t) / static_cast<double>(hi->t - lo->t));
}

std::optional<GeoPoint> edge_position_at(const ReebGraph& g, const ReebEdge& e, std::int64_t t) {
  const ReebNode& a = g.nodes.at(e.from);
  const ReebNode& b = g.nodes.at(e.to);
  if (a.centroid_path.empty() || b.centroid_path.empty()) return std::nullopt;
  const TimedPoint& p = a.centroid_path.back();
  const TimedPoint& q = b.centroid_path.front();
  if (t < p.t || t > q.t) return std::nullopt;
  if (q.t == p.t) return p.pos;
  return lerp(p.pos, q.pos, static_cast<double>(t - p.t) / static_cast<double>(q.t - p.t));
}

std::vector<std::string> check_invariants(const ReebGraph& g) {
  std::vector<std::string> bad;
  auto node_tag = [](const ReebNode& n) { return "node " + std::to_string(n.id) + ": "; };
  std::map<TrackId, std::vector<std::pair<std::int64_t, std::int64_t>>> spans;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const ReebNode& n = g.nodes[i];
    if (n.id != i) bad.push_back(node_tag(n) + "id does not match index");
    if (n.t_start > n.t_end) bad.push_back(node_tag(n) + "reversed interval");
    if (n.members.empty()) bad.push_back(node_tag(n) + "no members");
    if (!std::is_sorted(n.members.begin(), n.members.end()) ||
        std::adjacent_find(n.members.begin(), n.members.end()) != n.members.end()) {
      bad.push_back(node_tag(n) + "members not strictly sorted");
    }
    for (TrackId m : n.members) {
      if (m >= g.tracks.size()) bad.push_back(node_tag(n) + "member outside track table");
      spans[m].emplace_back(n.t_start, n.t_end);
    }
    for (std::size_t k = 0; k < n.centroid_path.size(); ++k) {
      const std::int64_t t = n.centroid_path[k].t;
      if (t < n.t_start || t > n.t_end) bad.push_back(node_tag(n) + "path outside interval");
      if (k > 0 && t <= n.centroid_path[k - 1].t) bad.push_back(node_tag(n) + "path not increasing");
    }
    if (n.features && n.features->max_stop_duration_s > static_cast<double>(n.t_end - n.t_start)) {
      bad.push_back(node_tag(n) + "stop longer than interval");
    }
  }
  for (auto& [track, list] : spans) {
    std::sort(list.begin(), list.end());
    for (std::size_t k = 1; k < list.size(); ++k) {
      if (list[k].first <= list[k - 1].second) {
        bad.push_back("track " + std::to_string(track) + ": overlapping nodes");
      }
    }
  }
  for (const ReebEdge& e : g.edges) {
    if (e.from >= g.nodes.size() || e.to >= g.nodes.size()) {
      bad.push_back("edge references missing node");
      continue;
    }
    const ReebNode& a = g.nodes[e.from];
    const ReebNode& b = g.nodes[e.to];
    if (a.t_end >= b.t_start) bad.push_back("edge goes backward in time");
    if (e.carried.empty()) bad.push_back("edge carries nothing");
    for (TrackId m : e.carried) {
      if (!std::binary_search(a.members.begin(), a.members.end(), m) ||
          !std::binary_search(b.members.begin(), b.members.end(), m)) {
        bad.push_back("edge carries a non-member");
      }
    }
  }
  return bad;
}

}  // namespace polreeb
