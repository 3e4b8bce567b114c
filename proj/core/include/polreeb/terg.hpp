#pragma once

#include <span>

#include "polreeb/reeb_graph.hpp"
#include "polreeb/trajectory.hpp"

namespace polreeb {

struct TergOptions {
  std::int64_t rep_stride_s = 60;  // spacing of the stored representative path
};

// Temporal Reeb graph of one agent: its daily tracks are overlaid by time of
// day, each bundle becomes a node and member hand-offs become edges. Track ids
// in the result index `tracks`.
ReebGraph build_terg(std::span<const GridTrack> tracks, const EpsilonConfig& cfg,
                     const TergOptions& opt = {});

// Same assembly for an arbitrary track set (several agents allowed).
ReebGraph assemble_reeb_graph(std::span<const GridTrack> tracks, const EpsilonConfig& cfg,
                              GraphKind kind, const TergOptions& opt = {});

}  // namespace polreeb
