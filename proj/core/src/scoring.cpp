#include "polreeb/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

#include "polreeb/error.hpp"

namespace polreeb {
namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

namespace {

using Point3 = bg::model::point<double, 3, bg::cs::cartesian>;
using Box3 = bg::model::box<Point3>;

Point3 to_ecef(const GeoPoint& p) {
  const double lat = deg_to_rad(p.lat_deg);
  const double lon = deg_to_rad(p.lon_deg);
  return {kEarthRadiusM * std::cos(lat) * std::cos(lon), kEarthRadiusM * std::cos(lat) * std::sin(lon),
          kEarthRadiusM * std::sin(lat)};
}

const NodeFeatures& need_features(const ReebNode& n) {
  if (!n.features) throw Error("features required");
  return *n.features;
}

// Lexicographic (distance, score, id) preference.
struct Best {
  NodeMatch m;
  bool have = false;
  void offer(double d, double score, std::int64_t id) {
    if (have) {
      if (d > m.distance_m) return;
      if (d == m.distance_m && (score > m.score || (score == m.score && id > m.nearest))) return;
    }
    m.distance_m = d;
    m.score = score;
    m.nearest = id;
    have = true;
  }
};

bool in_window(const ReebNode& ref, const ReebNode& test, double slack) {
  return static_cast<double>(ref.t_start) <= static_cast<double>(test.t_end) + slack &&
         static_cast<double>(ref.t_end) >= static_cast<double>(test.t_start) - slack;
}

}  // namespace

void FeatureWeights::validate() const {
  const double ws[] = {w_dist, w_stop, w_vel, w_mode};
  for (double x : ws) {
    if (!(x >= 0.0)) throw Error("feature weights must be nonnegative");
  }
  if (std::abs(w_dist + w_stop + w_vel + w_mode - 1.0) > 1e-9) throw Error("feature weights must sum to 1");
  if (!(dist_scale_m > 0.0) || !(stop_scale_s > 0.0) || !(vel_scale_mps > 0.0)) {
    throw Error("feature scales must be positive");
  }
  if (std::isnan(time_slack_s)) throw Error("time_slack_s must be a number");
}

void FusionParams::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || std::abs(alpha + beta - 1.0) > 1e-9) {
    throw Error("fusion weights must be nonnegative and sum to 1");
  }
}

double feature_distance(const NodeFeatures& test, const NodeFeatures& ref, double d_m,
                        const FeatureWeights& w) {
  const bool modes_agree = test.modes == ref.modes || test.modes.intersects(ref.modes);
  return w.w_dist * std::min(1.0, d_m / w.dist_scale_m) +
         w.w_stop * std::min(1.0, std::abs(test.max_stop_duration_s - ref.max_stop_duration_s) / w.stop_scale_s) +
         w.w_vel * std::min(1.0, std::abs(test.max_velocity_mps - ref.max_velocity_mps) / w.vel_scale_mps) +
         w.w_mode * (modes_agree ? 0.0 : 1.0);
}

struct ReferenceIndex::Tree {
  bgi::rtree<std::pair<Point3, std::size_t>, bgi::rstar<16>> rtree;
};

ReferenceIndex::ReferenceIndex(const ReebGraph& ref) {
  for (const ReebNode& n : ref.nodes) {
    need_features(n);
    if (!n.low_support) nodes_.push_back(&n);
  }
  if (nodes_.size() >= kIndexThreshold) {
    tree_ = std::make_unique<Tree>();
    std::vector<std::pair<Point3, std::size_t>> values;
    values.reserve(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) values.emplace_back(to_ecef(nodes_[i]->features->anchor), i);
    tree_->rtree = decltype(tree_->rtree)(values.begin(), values.end());
  }
}

ReferenceIndex::~ReferenceIndex() = default;
ReferenceIndex::ReferenceIndex(ReferenceIndex&&) noexcept = default;
ReferenceIndex& ReferenceIndex::operator=(ReferenceIndex&&) noexcept = default;

NodeMatch ReferenceIndex::match_exhaustive(const ReebNode& test, const FeatureWeights& w) const {
  if (nodes_.empty()) return NodeMatch{1.0, kNoReferenceNode, 0.0, true};
  const NodeFeatures& f = need_features(test);
  bool windowed = w.time_slack_s >= 0.0 &&
                  std::any_of(nodes_.begin(), nodes_.end(), [&](const ReebNode* n) { return in_window(*n, test, w.time_slack_s); });
  Best best;
  for (const ReebNode* n : nodes_) {
    if (windowed && !in_window(*n, test, w.time_slack_s)) continue;
    const double d = haversine_m(f.anchor, n->features->anchor);
    best.offer(d, feature_distance(f, *n->features, d, w), n->id);
  }
  return best.m;
}

NodeMatch ReferenceIndex::match(const ReebNode& test, const FeatureWeights& w) const {
  if (!tree_) return match_exhaustive(test, w);
  const NodeFeatures& f = need_features(test);
  const Point3 q = to_ecef(f.anchor);
  bool windowed = w.time_slack_s >= 0.0;
  auto ok = [&](const std::pair<Point3, std::size_t>& v) {
    return !windowed || in_window(*nodes_[v.second], test, w.time_slack_s);
  };
  std::vector<std::pair<Point3, std::size_t>> hit;
  if (windowed) tree_->rtree.query(bgi::nearest(q, 1) && bgi::satisfies(ok), std::back_inserter(hit));
  if (hit.empty()) {
    windowed = false;
    tree_->rtree.query(bgi::nearest(q, 1), std::back_inserter(hit));
  }
  // Gather everything at (numerically) the same chord distance, then decide
  // on the haversine distance like the scan does.
  const double chord = bg::distance(q, hit.front().first);
  const double r = chord * (1.0 + 1e-9) + 1e-6;
  const Box3 box({q.get<0>() - r, q.get<1>() - r, q.get<2>() - r}, {q.get<0>() + r, q.get<1>() + r, q.get<2>() + r});
  hit.clear();
  tree_->rtree.query(bgi::intersects(box), std::back_inserter(hit));
  Best best;
  for (const auto& v : hit) {
    if (bg::distance(q, v.first) > r || !ok(v)) continue;
    const ReebNode* n = nodes_[v.second];
    const double d = haversine_m(f.anchor, n->features->anchor);
    best.offer(d, feature_distance(f, *n->features, d, w), n->id);
  }
  return best.m;
}

NodeMatch node_anomaly(const ReebNode& v_test, const ReebGraph& reference, const FeatureWeights& w) {
  w.validate();
  return ReferenceIndex(reference).match(v_test, w);
}

std::vector<NodeScore> score_test_graph(const ReebGraph& test, const ReferenceIndex& train,
                                        const ReferenceIndex& marg, const FusionParams& fp,
                                        const FeatureWeights& w) {
  fp.validate();
  w.validate();
  std::vector<NodeScore> out;
  out.reserve(test.nodes.size());
  for (const ReebNode& n : test.nodes) {
    const NodeMatch a = train.match(n, w);
    const NodeMatch p = marg.match(n, w);
    out.push_back({n.id, a.score, p.score, fp.alpha * a.score + fp.beta * p.score, a.nearest, p.nearest});
  }
  return out;
}

void require_same_agent(const ReebGraph& test, const ReebGraph& train) {
  auto agents_of = [](const ReebGraph& g) {
    std::vector<std::string> ids;
    for (const TrackInfo& t : g.tracks) ids.push_back(t.agent_id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
  };
  const auto a = agents_of(test);
  if (a.size() != 1 || a != agents_of(train)) throw Error("agent mismatch");
}

std::vector<NodeScore> score_test_graph(const ReebGraph& test, const ReebGraph& train,
                                        const ReebGraph& marg, const FusionParams& fp,
                                        const FeatureWeights& w) {
  require_same_agent(test, train);
  return score_test_graph(test, ReferenceIndex(train), ReferenceIndex(marg), fp, w);
}

double aggregate_agent(std::span<const NodeScore> scores, const Aggregation& method) {
  if (scores.empty()) throw Error("no node scores to aggregate");
  std::vector<double> v;
  v.reserve(scores.size());
  for (const NodeScore& s : scores) v.push_back(s.s_combined);
  if (method.kind == Aggregation::Kind::kMax) return *std::max_element(v.begin(), v.end());
  const std::size_t k = std::clamp<std::size_t>(method.k, 1, v.size());
  std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end(), std::greater<>());
  return std::accumulate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), 0.0) / static_cast<double>(k);
}

AgentScore summarize_agent(const std::string& agent_id, const ReebGraph& test,
                           std::span<const NodeScore> scores, const Aggregation& method,
                           std::size_t top_k) {
  AgentScore out{agent_id, aggregate_agent(scores, method), {}};
  std::vector<NodeScore> ranked(scores.begin(), scores.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const NodeScore& a, const NodeScore& b) {
    if (a.s_combined != b.s_combined) return a.s_combined > b.s_combined;
    return a.node < b.node;
  });
  ranked.resize(std::min(top_k, ranked.size()));
  for (const NodeScore& s : ranked) {
    const ReebNode& n = test.nodes.at(s.node);
    std::int64_t day_start = test.tracks.at(n.members.front()).day_start;
    for (TrackId m : n.members) day_start = std::min(day_start, test.tracks.at(m).day_start);
    out.top_nodes.push_back({s.node, s.s_combined, day_start + n.t_start, need_features(n).anchor});
  }
  return out;
}

std::vector<AgentDetection> apply_wlg_filter(std::span<const AgentScore> scores,
                                             const WlgAssignment& wlg, const WlgPolicy& policy) {
  std::string missing;
  for (const AgentScore& s : scores) {
    if (!wlg.contains(s.agent_id)) missing += (missing.empty() ? "" : ", ") + s.agent_id;
  }
  if (!missing.empty()) throw Error("missing group assignment for: " + missing);

  std::vector<AgentDetection> out;
  out.reserve(scores.size());
  for (const AgentScore& s : scores) out.push_back({s.agent_id, s.score, false, s.top_nodes});
  std::sort(out.begin(), out.end(), [](const AgentDetection& a, const AgentDetection& b) {
    if (a.agent_score != b.agent_score) return a.agent_score > b.agent_score;
    return a.agent_id < b.agent_id;
  });
  std::map<std::string, std::size_t> rank_in_group;
  for (AgentDetection& d : out) {
    const std::size_t rank = rank_in_group[wlg.at(d.agent_id)]++;
    const bool top = rank < policy.n;
    const bool above = d.agent_score >= policy.theta;
    switch (policy.kind) {
      case WlgPolicy::Kind::kTopN: d.flagged = top; break;
      case WlgPolicy::Kind::kThreshold: d.flagged = above; break;
      case WlgPolicy::Kind::kHybrid: d.flagged = top && above; break;
    }
  }
  return out;
}

}  // namespace polreeb
