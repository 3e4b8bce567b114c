#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "polreeb/reeb_graph.hpp"

namespace polreeb {

struct FeatureWeights {
  double w_dist = 0.4;
  double w_stop = 0.3;
  double w_vel = 0.2;
  double w_mode = 0.1;
  double dist_scale_m = 500.0;
  double stop_scale_s = 3600.0;
  double vel_scale_mps = 15.0;
  // Reference nodes are candidates only when their interval comes within this
  // many seconds of the test node's interval; negative disables the window.
  // With no candidate inside the window every node is considered.
  double time_slack_s = -1.0;

  void validate() const;
};

struct FusionParams {
  double alpha = 0.5;  // agent-level weight
  double beta = 0.5;   // population-level weight

  void validate() const;
};

inline constexpr std::int64_t kNoReferenceNode = -1;

struct NodeMatch {
  double score = 1.0;
  std::int64_t nearest = kNoReferenceNode;
  double distance_m = 0.0;
  bool empty_reference = false;  // no eligible reference node: maximal novelty
};

// Weighted, capped feature difference between a test node and one reference
// node at anchor distance d_m. Zero for identical features at d_m = 0.
double feature_distance(const NodeFeatures& test, const NodeFeatures& ref, double d_m,
                        const FeatureWeights& w);

// Nearest-node lookup over one reference graph. Nodes marked low_support are
// not eligible. Small graphs are scanned; from kIndexThreshold nodes on an
// R-tree over the anchors answers the queries.
class ReferenceIndex {
 public:
  static constexpr std::size_t kIndexThreshold = 1000;

  explicit ReferenceIndex(const ReebGraph& ref);
  ~ReferenceIndex();
  ReferenceIndex(ReferenceIndex&&) noexcept;
  ReferenceIndex& operator=(ReferenceIndex&&) noexcept;

  // Nearest eligible node by anchor haversine distance; exact distance ties go
  // to the lower score, then the lower id.
  NodeMatch match(const ReebNode& test, const FeatureWeights& w) const;

  // Same answer computed by a full scan, for cross-checking the index.
  NodeMatch match_exhaustive(const ReebNode& test, const FeatureWeights& w) const;

  std::size_t eligible() const noexcept { return nodes_.size(); }

 private:
  struct Tree;
  std::vector<const ReebNode*> nodes_;
  std::unique_ptr<Tree> tree_;
};

NodeMatch node_anomaly(const ReebNode& v_test, const ReebGraph& reference, const FeatureWeights& w);

// Throws "agent mismatch" unless both graphs hold tracks of one and the same agent.
void require_same_agent(const ReebGraph& test, const ReebGraph& train);

struct NodeScore {
  std::uint32_t node = 0;
  double s_agent = 0.0;
  double s_pop = 0.0;
  double s_combined = 0.0;
  std::int64_t nearest_train = kNoReferenceNode;
  std::int64_t nearest_marg = kNoReferenceNode;
};

// Per test node: agent-level score against the agent's own training graph,
// population score against the population graph, fused as
// alpha * s_agent + beta * s_pop. Throws "agent mismatch" when test and
// training graphs describe different agents.
std::vector<NodeScore> score_test_graph(const ReebGraph& test, const ReebGraph& train,
                                        const ReebGraph& marg, const FusionParams& fp,
                                        const FeatureWeights& w);
std::vector<NodeScore> score_test_graph(const ReebGraph& test, const ReferenceIndex& train,
                                        const ReferenceIndex& marg, const FusionParams& fp,
                                        const FeatureWeights& w);

struct Aggregation {
  enum class Kind : std::uint8_t { kMax, kMeanTopK };
  Kind kind = Kind::kMax;
  std::size_t k = 3;
};

double aggregate_agent(std::span<const NodeScore> scores, const Aggregation& method);

struct TopNode {
  std::uint32_t node = 0;
  double score = 0.0;
  std::int64_t time = 0;  // epoch seconds of the node start on its earliest member day
  GeoPoint location;
};

struct AgentScore {
  std::string agent_id;
  double score = 0.0;
  std::vector<TopNode> top_nodes;  // highest first
};

// Convenience: aggregate plus the k most anomalous nodes of `test`.
AgentScore summarize_agent(const std::string& agent_id, const ReebGraph& test,
                           std::span<const NodeScore> scores, const Aggregation& method,
                           std::size_t top_k = 3);

using WlgAssignment = std::map<std::string, std::string>;  // agent id -> group id

struct WlgPolicy {
  enum class Kind : std::uint8_t { kTopN, kThreshold, kHybrid };
  Kind kind = Kind::kTopN;
  std::size_t n = 1;
  double theta = 0.5;
};

struct AgentDetection {
  std::string agent_id;
  double agent_score = 0.0;
  bool flagged = false;
  std::vector<TopNode> top_nodes;
};

// Flags agents per weak-label group. Output sorted by score descending, ties by
// agent id. Throws listing every agent without a group.
std::vector<AgentDetection> apply_wlg_filter(std::span<const AgentScore> scores,
                                             const WlgAssignment& wlg, const WlgPolicy& policy);

}  // namespace polreeb
