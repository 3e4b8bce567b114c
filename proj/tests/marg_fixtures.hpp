#pragma once

#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "oracles.hpp"
#include "polreeb/marg.hpp"

namespace fixtures {

using namespace polreeb;

inline const GeoPoint kCenter{40.0, -75.0};

// Track on the 60 s grid from (east, north) offsets in meters.
inline GridTrack offsets_track(const std::string& agent, std::int64_t first,
                               const std::vector<std::pair<double, double>>& en) {
  GridTrack t;
  t.agent_id = agent;
  t.stride_s = 60;
  t.first_slot = first;
  for (const auto& [e, n] : en) {
    t.pos.push_back(offset_m(kCenter, e, n));
    t.present.push_back(1);
  }
  return t;
}

// Three tracks forming a shared bundle that one member leaves and another
// joins, plus a fourth that visits the bundle twice.
inline std::vector<GridTrack> handoff_tracks() {
  std::vector<std::pair<double, double>> a, b, c, d;
  for (int k = 0; k < 20; ++k) {
    const double x = 40.0 * k;
    a.emplace_back(x, 0.0);
    b.emplace_back(k <= 9 ? x : x + 300.0 * (k - 9), 2.0);
    c.emplace_back(x, k < 14 ? -1000.0 : -3.0);
    if (k >= 3 && k <= 16) {
      const bool with_first = k >= 5 && k <= 7;
      const bool with_second = k >= 15;
      d.emplace_back(x, with_first ? 4.0 : (with_second ? -1.0 : 1000.0));
    }
  }
  return {offsets_track("a1", 0, a), offsets_track("a2", 0, b), offsets_track("a3", 0, c),
          offsets_track("a4", 3, d)};
}

inline MargConfig raw_config(std::size_t m) {
  MargConfig cfg;
  cfg.initial_cohort_M = m;
  cfg.stop_gate_s = 0.0;
  return cfg;
}

inline std::vector<AgentContribution> as_agents(const std::vector<GridTrack>& tracks) {
  std::vector<AgentContribution> out;
  for (const GridTrack& t : tracks) {
    const std::vector<GridTrack> one{t};
    out.push_back({t.agent_id, raw_contribution(one)});
  }
  return out;
}

// (members, t_start, t_end) per node, plus edges in terms of those keys.
using NodeKey = std::tuple<std::vector<TrackId>, std::int64_t, std::int64_t>;
struct Topology {
  std::set<NodeKey> nodes;
  std::set<std::pair<NodeKey, NodeKey>> edges;
  bool operator==(const Topology&) const = default;
};

inline Topology topology(const ReebGraph& g) {
  Topology t;
  auto key = [&](std::uint32_t i) {
    const ReebNode& n = g.nodes[i];
    return NodeKey{n.members, n.t_start, n.t_end};
  };
  for (std::uint32_t i = 0; i < g.nodes.size(); ++i) t.nodes.insert(key(i));
  for (const ReebEdge& e : g.edges) t.edges.insert({key(e.from), key(e.to)});
  return t;
}

// Agents made of a few random-walk days each, with ids "p<k>".
inline std::vector<AgentContribution> random_population(std::mt19937_64& rng, std::size_t agents,
                                                        std::size_t max_days = 3) {
  std::vector<AgentContribution> out;
  for (std::size_t a = 0; a < agents; ++a) {
    auto tracks = oracle::random_tracks(rng, max_days, 120, 200.0, 20.0);
    const std::string id = "p" + std::to_string(1000 + a);
    for (auto& t : tracks) t.agent_id = id;
    out.push_back({id, raw_contribution(tracks)});
  }
  return out;
}

inline std::int64_t present_slots(const std::vector<AgentContribution>& agents) {
  std::int64_t n = 0;
  for (const auto& a : agents) {
    for (const auto& t : a.tracks) n += std::count(t.track.present.begin(), t.track.present.end(), 1);
  }
  return n;
}

inline std::int64_t support_slots(const ReebGraph& g) {
  std::int64_t n = 0;
  for (const ReebNode& v : g.nodes) n += static_cast<std::int64_t>(v.support) * ((v.t_end - v.t_start) / g.stride_s + 1);
  return n;
}

// Duplicate add: the second copy of T lands on exactly the nodes the first
// created (same intervals, same edge relation), each gaining one more member.
inline bool duplicate_add_holds(const ReebGraph& g0, const PseudoTrack& t, const MargConfig& cfg,
                                std::string* why = nullptr) {
  auto fail = [&](const std::string& w) {
    if (why) *why = w;
    return false;
  };
  const ReebGraph g1 = update_reeb(g0, t, cfg);
  const ReebGraph g2 = update_reeb(g1, t, cfg);
  if (g1.nodes.size() != g2.nodes.size()) return fail("node count changed");
  const auto first = static_cast<TrackId>(g0.tracks.size());
  const TrackId second = first + 1;
  for (std::size_t i = 0; i < g1.nodes.size(); ++i) {
    const ReebNode& a = g1.nodes[i];
    const ReebNode& b = g2.nodes[i];
    if (a.t_start != b.t_start || a.t_end != b.t_end) return fail("interval changed");
    std::vector<TrackId> want = a.members;
    const bool has_t = std::binary_search(a.members.begin(), a.members.end(), first);
    if (has_t) want.push_back(second);
    if (b.members != want) return fail("members differ");
    if (b.support != a.support + (has_t ? 1U : 0U)) return fail("support not incremented");
  }
  if (g1.edges.size() != g2.edges.size()) return fail("edge count changed");
  for (std::size_t i = 0; i < g1.edges.size(); ++i) {
    if (g1.edges[i].from != g2.edges[i].from || g1.edges[i].to != g2.edges[i].to) return fail("edges differ");
  }
  return true;
}

}  // namespace fixtures
