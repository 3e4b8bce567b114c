#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "polreeb/error.hpp"
#include "polreeb/scoring.hpp"

using namespace polreeb;

namespace {

struct NodeSpec {
  GeoPoint anchor;
  double stop = 0.0;
  double vmax = 0.0;
  std::uint8_t modes = 0;
  std::int64_t t0 = 0, t1 = 0;
  std::uint32_t support = 1;
};

ReebNode make_node(std::uint32_t id, const NodeSpec& s) {
  ReebNode n;
  n.id = id;
  n.members = {0};
  n.t_start = s.t0;
  n.t_end = s.t1;
  n.support = s.support;
  n.centroid_path = {{s.t0, s.anchor}};
  NodeFeatures f;
  f.anchor = s.anchor;
  f.max_stop_duration_s = s.stop;
  f.max_velocity_mps = s.vmax;
  f.modes = ModeSet{s.modes};
  n.features = f;
  return n;
}

ReebGraph make_graph(const std::vector<NodeSpec>& specs, const std::string& agent = "a") {
  ReebGraph g;
  g.tracks.push_back({agent, 0, 0, -1});
  for (std::size_t i = 0; i < specs.size(); ++i) g.nodes.push_back(make_node(static_cast<std::uint32_t>(i), specs[i]));
  return g;
}

const GeoPoint kC{40.05, -75.05};

FeatureWeights only_distance() {
  FeatureWeights w;
  w.w_dist = 1.0;
  w.w_stop = w.w_vel = w.w_mode = 0.0;
  return w;
}

}  // namespace

TEST_CASE("feature distance") {
  NodeFeatures a, b;
  CHECK(feature_distance(a, b, 250.0, only_distance()) == doctest::Approx(0.5));
  CHECK(feature_distance(a, b, 5000.0, only_distance()) == doctest::Approx(1.0));
  FeatureWeights w;
  CHECK(feature_distance(a, a, 0.0, w) == 0.0);
  b.max_stop_duration_s = 1800;
  b.max_velocity_mps = 30;
  b.modes.insert(Mode::kCar);
  a.modes.insert(Mode::kWalk);
  CHECK(feature_distance(a, b, 500.0, w) == doctest::Approx(0.4 + 0.3 * 0.5 + 0.2 + 0.1));
  a.modes.insert(Mode::kCar);
  CHECK(feature_distance(a, b, 500.0, w) == doctest::Approx(0.4 + 0.3 * 0.5 + 0.2));
}

TEST_CASE("weights are validated") {
  FeatureWeights w;
  w.w_dist = 0.5;
  CHECK_THROWS(w.validate());
  FusionParams fp{0.7, 0.7};
  CHECK_THROWS(fp.validate());
  CHECK_THROWS(FusionParams{-0.5, 1.5}.validate());
}

TEST_CASE("node anomaly") {
  const ReebGraph ref = make_graph({{kC, 600, 1, 1}, {offset_m(kC, 1000, 0), 0, 10, 4}});
  SUBCASE("identical node scores zero") {
    const NodeMatch m = node_anomaly(ref.nodes[1], ref, FeatureWeights{});
    CHECK(m.score == 0.0);
    CHECK(m.nearest == 1);
  }
  SUBCASE("empty reference is maximal novelty") {
    const NodeMatch m = node_anomaly(ref.nodes[0], ReebGraph{}, FeatureWeights{});
    CHECK(m.score == 1.0);
    CHECK(m.nearest == kNoReferenceNode);
    CHECK(m.empty_reference);
  }
  SUBCASE("low support nodes are skipped") {
    ReebGraph marg = ref;
    marg.kind = GraphKind::kPopulationMarg;
    marg.nodes[0].low_support = true;
    const NodeMatch m = node_anomaly(ref.nodes[0], marg, FeatureWeights{});
    CHECK(m.nearest == 1);
  }
  SUBCASE("monotone in distance") {
    double prev = -1.0;
    for (double d = 0; d <= 1200; d += 25) {
      const ReebNode t = make_node(0, {offset_m(kC, 0, d), 100, 2, 1});
      const double s = node_anomaly(t, make_graph({{kC, 600, 1, 1}}), FeatureWeights{}).score;
      CHECK(s >= prev);
      prev = s;
    }
  }
  SUBCASE("missing features") {
    ReebGraph bare = ref;
    bare.nodes[0].features.reset();
    CHECK_THROWS_WITH(node_anomaly(ref.nodes[0], bare, FeatureWeights{}), "features required");
  }
}

TEST_CASE("time window on matching") {
  // A near node in the morning and a farther one at noon.
  const ReebGraph ref = make_graph({{kC, 0, 0, 0, 8 * 3600, 9 * 3600}, {offset_m(kC, 300, 0), 0, 0, 0, 12 * 3600, 13 * 3600}});
  const ReebNode noon = make_node(0, {kC, 0, 0, 0, 12 * 3600 + 600, 12 * 3600 + 1800});
  FeatureWeights w = only_distance();
  CHECK(node_anomaly(noon, ref, w).nearest == 0);
  w.time_slack_s = 1800;
  const NodeMatch m = node_anomaly(noon, ref, w);
  CHECK(m.nearest == 1);
  CHECK(m.distance_m == doctest::Approx(300.0).epsilon(1e-6));
  const ReebNode night = make_node(0, {kC, 0, 0, 0, 22 * 3600, 23 * 3600});
  CHECK(node_anomaly(night, ref, w).nearest == 0);  // nothing in the window: all nodes compete
}

TEST_CASE("indexed lookup equals the exhaustive oracle") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> off(-3000, 3000), stop(0, 7200), v(0, 20);
  std::uniform_int_distribution<int> slot(0, 1439), mode(0, 7);
  std::vector<NodeSpec> specs;
  for (int i = 0; i < 1500; ++i) {
    const std::int64_t t0 = slot(rng) * 60;
    specs.push_back({offset_m(kC, off(rng), off(rng)), stop(rng), v(rng), static_cast<std::uint8_t>(mode(rng)), t0, t0 + 1800});
  }
  specs.push_back(specs[3]);  // exact duplicate anchors exercise tie-breaking
  specs.back().stop = 0;
  const ReebGraph ref = make_graph(specs);
  const ReferenceIndex idx(ref);
  REQUIRE(idx.eligible() >= ReferenceIndex::kIndexThreshold);
  for (double slack : {-1.0, 0.0, 3600.0}) {
    FeatureWeights w;
    w.time_slack_s = slack;
    for (int i = 0; i < 400; ++i) {
      const std::int64_t t0 = slot(rng) * 60;
      const ReebNode t = make_node(0, {i == 0 ? specs[3].anchor : offset_m(kC, off(rng), off(rng)), stop(rng), v(rng),
                                       static_cast<std::uint8_t>(mode(rng)), t0, t0 + 600});
      const NodeMatch fast = idx.match(t, w);
      // Oracle: independent scan with the great-circle formula.
      double best_d = 1e300, best_s = 0;
      std::int64_t best_id = -1;
      bool any_in = false;
      for (const auto& n : ref.nodes) {
        any_in = any_in || slack < 0 || (n.t_start <= t.t_end + slack && n.t_end >= t.t_start - slack);
      }
      for (const auto& n : ref.nodes) {
        if (slack >= 0 && any_in && !(n.t_start <= t.t_end + slack && n.t_end >= t.t_start - slack)) continue;
        const double d = oracle::great_circle_m(t.features->anchor, n.features->anchor);
        const double s = feature_distance(*t.features, *n.features, d, w);
        if (d < best_d - 1e-6 || (std::abs(d - best_d) <= 1e-6 && (s < best_s || (s == best_s && n.id < best_id)))) {
          best_d = d;
          best_s = s;
          best_id = n.id;
        }
      }
      CHECK(fast.nearest == best_id);
      CHECK(fast.score == doctest::Approx(best_s).epsilon(1e-9));
      const NodeMatch slow = idx.match_exhaustive(t, w);
      CHECK(slow.nearest == fast.nearest);
      CHECK(slow.score == fast.score);
    }
  }
}

TEST_CASE("score fusion") {
  const ReebGraph train = make_graph({{kC, 600, 1, 1}, {offset_m(kC, 900, 0), 0, 12, 4}});
  const ReebGraph marg = make_graph({{offset_m(kC, 100, 0), 300, 3, 1}}, "pop");
  const ReebGraph test = make_graph({{offset_m(kC, 50, 50), 900, 2, 1}, {offset_m(kC, 2000, 0), 0, 14, 4}});
  SUBCASE("linear combination") {
    const auto s = score_test_graph(test, train, marg, {0.3, 0.7}, FeatureWeights{});
    for (const auto& n : s) CHECK(n.s_combined == doctest::Approx(0.3 * n.s_agent + 0.7 * n.s_pop).epsilon(1e-12));
  }
  SUBCASE("alpha one is the agent score") {
    for (const auto& n : score_test_graph(test, train, marg, {1.0, 0.0}, FeatureWeights{})) CHECK(n.s_combined == n.s_agent);
  }
  SUBCASE("self score is zero") {
    for (const auto& n : score_test_graph(train, train, marg, {1.0, 0.0}, FeatureWeights{})) CHECK(n.s_combined == 0.0);
  }
  SUBCASE("agent mismatch") {
    CHECK_THROWS_WITH(score_test_graph(make_graph({{kC}}, "b"), train, marg, {}, FeatureWeights{}), "agent mismatch");
  }
  SUBCASE("bounded") {
    for (const auto& n : score_test_graph(test, train, marg, {}, FeatureWeights{})) {
      CHECK(n.s_combined >= 0.0);
      CHECK(n.s_combined <= 1.0);
    }
  }
}

TEST_CASE("aggregation") {
  auto ns = [](std::vector<double> v) {
    std::vector<NodeScore> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back({static_cast<std::uint32_t>(i), 0, 0, v[i], -1, -1});
    return out;
  };
  CHECK(aggregate_agent(ns({0.1, 0.9}), {Aggregation::Kind::kMax}) == 0.9);
  CHECK(aggregate_agent(ns({0.9, 0.5, 0.1}), {Aggregation::Kind::kMeanTopK, 2}) == doctest::Approx(0.7));
  CHECK(aggregate_agent(ns({0.4}), {Aggregation::Kind::kMeanTopK, 3}) == 0.4);
  CHECK(aggregate_agent(ns({0.4}), {Aggregation::Kind::kMax}) == 0.4);
  CHECK_THROWS(aggregate_agent(ns({}), {}));
}

TEST_CASE("weak-label group filter") {
  auto scores = [](std::vector<std::pair<std::string, double>> v) {
    std::vector<AgentScore> out;
    for (auto& [id, s] : v) out.push_back({id, s, {}});
    return out;
  };
  const WlgAssignment one{{"a", "g"}, {"b", "g"}, {"c", "g"}};
  auto flagged = [](const std::vector<AgentDetection>& d) {
    std::vector<std::string> out;
    for (const auto& x : d) {
      if (x.flagged) out.push_back(x.agent_id);
    }
    return out;
  };
  const auto s3 = scores({{"b", 0.2}, {"a", 0.9}, {"c", 0.1}});
  const auto top = apply_wlg_filter(s3, one, {WlgPolicy::Kind::kTopN, 1});
  CHECK(flagged(top) == std::vector<std::string>{"a"});
  CHECK(top.front().agent_id == "a");
  CHECK(top.back().agent_id == "c");
  const auto s2 = scores({{"a", 0.9}, {"b", 0.2}});
  CHECK(flagged(apply_wlg_filter(s2, one, {WlgPolicy::Kind::kThreshold, 1, 0.5})).size() == 1);
  CHECK(flagged(apply_wlg_filter(s2, one, {WlgPolicy::Kind::kHybrid, 1, 0.95})).empty());
  CHECK(flagged(apply_wlg_filter(scores({{"b", 0.5}, {"a", 0.5}}), one, {WlgPolicy::Kind::kTopN, 1})) ==
        std::vector<std::string>{"a"});
  try {
    apply_wlg_filter(scores({{"x", 0.1}, {"y", 0.2}}), one, {});
    FAIL("expected missing group error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("x") != std::string::npos);
    CHECK(std::string(e.what()).find("y") != std::string::npos);
  }
  SUBCASE("scaling keeps the flagged set") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0, 1);
    WlgAssignment wlg;
    std::vector<AgentScore> a, b;
    for (int i = 0; i < 60; ++i) {
      const std::string id = "p" + std::to_string(i);
      wlg[id] = "g" + std::to_string(i % 6);
      const double s = u(rng);
      a.push_back({id, s, {}});
      b.push_back({id, s * 0.37, {}});
    }
    auto set_of = [&](const std::vector<AgentDetection>& d) {
      auto f = flagged(d);
      std::sort(f.begin(), f.end());
      return f;
    };
    CHECK(set_of(apply_wlg_filter(a, wlg, {WlgPolicy::Kind::kTopN, 2})) == set_of(apply_wlg_filter(b, wlg, {WlgPolicy::Kind::kTopN, 2})));
  }
}

TEST_CASE("agent summary") {
  ReebGraph test = make_graph({{kC, 0, 0, 0, 3600, 7200}, {offset_m(kC, 100, 0), 0, 0, 0, 9000, 9600}});
  test.tracks[0].day_start = 1704067200;
  const std::vector<NodeScore> s{{0, 0, 0, 0.2, -1, -1}, {1, 0, 0, 0.8, -1, -1}};
  const AgentScore a = summarize_agent("a", test, s, {}, 1);
  CHECK(a.score == 0.8);
  REQUIRE(a.top_nodes.size() == 1);
  CHECK(a.top_nodes[0].node == 1);
  CHECK(a.top_nodes[0].time == 1704067200 + 9000);
}
