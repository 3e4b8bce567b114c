#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "polreeb/features.hpp"
#include "polreeb/reeb_graph.hpp"

namespace polreeb {

struct MargConfig {
  std::size_t initial_cohort_M = 1000;
  EpsilonConfig epsilon;
  std::int64_t stride_s = 60;
  std::uint32_t min_support = 2;
  double stop_gate_s = 3600.0;  // agent-graph nodes need a longer stop to enter the model
  StopParams stop;              // used to describe population nodes
  ModeThresholds modes;

  void validate() const;
};

// A track entering the population model together with its provenance.
struct PseudoTrack {
  GridTrack track;
  TrackInfo info;
};

// Everything one agent contributes, in insertion order.
struct AgentContribution {
  std::string agent_id;
  std::vector<PseudoTrack> tracks;
};

// Representative paths of the agent-graph nodes whose max stop reaches
// stop_gate_s, resampled onto the population grid.
std::vector<PseudoTrack> gate_nodes(const ReebGraph& terg, double stop_gate_s, std::int64_t stride_s);

// Raw tracks as contributions (the ungated mode for small datasets).
std::vector<PseudoTrack> raw_contribution(std::span<const GridTrack> tracks);

// Batch construction over the pooled tracks of the initial cohort.
// Throws "empty population model" when the cohort carries no tracks.
ReebGraph build_initial_marg(std::span<const AgentContribution> cohort, const MargConfig& cfg);

// Per-element proximity transition observed while scanning a new track.
struct ElementEvent {
  EventKind kind = EventKind::kConnect;  // kConnect or kDisconnect
  std::int64_t time = 0;
  std::uint32_t node = 0;                // node id in the graph before the update
};

struct UpdateReport {
  std::vector<ElementEvent> events;
  std::size_t touched_nodes = 0;
};

// Adds one track to an existing population graph. Every node active at a
// slot keeps its own connected flag, flipped when the track comes within (or
// leaves) epsilon of the node's representative position. Afterwards touched
// nodes are split at the flip times, each run of constant contact becomes a
// node shared with the newcomer, and the newcomer's solitary spans become new
// nodes. Cost is linear in the track length times the active node count.
ReebGraph update_reeb(ReebGraph g, const PseudoTrack& t, const MargConfig& cfg,
                      UpdateReport* report = nullptr);

// Batch build of the first M agents (in the given order), then one update per
// remaining pseudo-track. Nodes below min_support are kept but marked.
ReebGraph build_marg(std::span<const AgentContribution> agents, const MargConfig& cfg);

void mark_low_support(ReebGraph& g, std::uint32_t min_support);

// Histogram tables (support, node duration, edge carriage) as CSV.
void write_marg_stats(std::ostream& os, const ReebGraph& g);

// Single-writer holder: readers take immutable snapshots; add() applies an
// update to a private copy and publishes it atomically.
class MargStore {
 public:
  MargStore(ReebGraph initial, MargConfig cfg);

  std::shared_ptr<const ReebGraph> snapshot() const;
  void add(const PseudoTrack& t);

 private:
  MargConfig cfg_;
  std::mutex writer_;
  mutable std::mutex publish_;
  std::shared_ptr<const ReebGraph> current_;
};

}  // namespace polreeb
