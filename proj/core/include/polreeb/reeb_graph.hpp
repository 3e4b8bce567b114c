#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "polreeb/events.hpp"
#include "polreeb/geo.hpp"
#include "polreeb/spatial_index.hpp"

namespace polreeb {

enum class Mode : std::uint8_t { kWalk = 1, kBike = 2, kCar = 4 };

struct ModeSet {
  std::uint8_t bits = 0;

  void insert(Mode m) noexcept { bits |= static_cast<std::uint8_t>(m); }
  bool contains(Mode m) const noexcept { return (bits & static_cast<std::uint8_t>(m)) != 0; }
  bool empty() const noexcept { return bits == 0; }
  bool intersects(ModeSet o) const noexcept { return (bits & o.bits) != 0; }
  std::string to_string() const;  // "walk|car", "" when empty

  friend bool operator==(const ModeSet&, const ModeSet&) = default;
};

struct NodeFeatures {
  double max_stop_duration_s = 0.0;
  double max_velocity_mps = 0.0;
  ModeSet modes;
  std::optional<double> mean_bearing_deg;  // unset for stationary nodes
  GeoPoint anchor;                         // time-weighted mean position
  double dwell_total_s = 0.0;              // stopped time summed over members

  friend bool operator==(const NodeFeatures&, const NodeFeatures&) = default;
};

// Provenance of one track referenced by node members.
struct TrackInfo {
  std::string agent_id;
  std::int32_t day_index = 0;
  std::int64_t day_start = 0;
  std::int64_t source_node = -1;  // population graphs: originating agent-graph node

  friend bool operator==(const TrackInfo&, const TrackInfo&) = default;
};

struct ReebNode {
  std::uint32_t id = 0;
  std::vector<TrackId> members;          // sorted
  std::int64_t t_start = 0;              // inclusive grid times
  std::int64_t t_end = 0;
  std::vector<TimedPoint> centroid_path; // mean member position; t is grid time
  std::optional<NodeFeatures> features;
  std::uint32_t support = 1;
  bool low_support = false;

  friend bool operator==(const ReebNode&, const ReebNode&) = default;
};

struct ReebEdge {
  std::uint32_t from = 0;
  std::uint32_t to = 0;
  std::vector<TrackId> carried;  // sorted, subset of both endpoints' members

  friend bool operator==(const ReebEdge&, const ReebEdge&) = default;
};

enum class GraphKind : std::uint8_t { kAgentTerg = 0, kPopulationMarg = 1 };

// Shared by per-agent temporal graphs and the population graph. Node ids equal
// their index in `nodes`.
struct ReebGraph {
  GraphKind kind = GraphKind::kAgentTerg;
  EpsilonConfig epsilon;
  std::int64_t stride_s = 60;
  std::int64_t rep_stride_s = 60;
  std::vector<TrackInfo> tracks;
  std::vector<ReebNode> nodes;
  std::vector<ReebEdge> edges;  // sorted by (from, to)

  bool annotated() const noexcept;
  std::int64_t presence_s(const ReebNode& n) const noexcept { return n.t_end - n.t_start + stride_s; }

  friend bool operator==(const ReebGraph&, const ReebGraph&) = default;
};

// Derives the edge set from node membership: an edge joins two nodes whenever
// some member leaves the first at t_end and is found in the second one grid
// step later.
void rebuild_edges(ReebGraph& g);

// Orders nodes by (t_start, members), renumbers them and rebuilds edges.
void canonicalize(ReebGraph& g);

// Samples of the mean position at t_start, t_end and every multiple of
// rep_stride_s in between.
std::vector<std::int64_t> representative_times(std::int64_t t_start, std::int64_t t_end,
                                                std::int64_t rep_stride_s);

// Position on a node's representative path at grid time t; nullopt outside
// the node interval.
std::optional<GeoPoint> edge_position_at(const ReebNode& node, std::int64_t t);

// Position along an edge: the straight hand-off from the tail node's last
// path point to the head node's first one.
std::optional<GeoPoint> edge_position_at(const ReebGraph& g, const ReebEdge& e, std::int64_t t);

// Structural checks (temporal DAG, membership tiling, edge carriage, path
// bounds). Returns one message per violation; empty when the graph is valid.
std::vector<std::string> check_invariants(const ReebGraph& g);

}  // namespace polreeb
