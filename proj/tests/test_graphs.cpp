#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "marg_fixtures.hpp"
#include "oracles.hpp"
#include "polreeb/error.hpp"
#include "polreeb/features.hpp"
#include "polreeb/serialize.hpp"
#include "polreeb/terg.hpp"

using namespace polreeb;

namespace {

const GeoPoint kHome{40.0, -75.0};

std::vector<TimedPoint> still(std::int64_t t0, std::int64_t t1, const GeoPoint& at, std::int64_t step = 60) {
  std::vector<TimedPoint> out;
  for (std::int64_t t = t0; t <= t1; t += step) out.push_back({t, at});
  return out;
}

// Straight drive east from `from` at `v` m/s, sampled every `step` seconds.
std::vector<TimedPoint> drive(std::int64_t t0, std::int64_t t1, const GeoPoint& from, double v, std::int64_t step = 60) {
  std::vector<TimedPoint> out;
  for (std::int64_t t = t0; t <= t1; t += step) out.push_back({t, offset_m(from, v * static_cast<double>(t - t0), 0.0)});
  return out;
}

GridTrack grid(const std::string& agent, std::int32_t day, const std::vector<TimedPoint>& pts) {
  return GridTrack::from_grid_points(agent, day, 60, pts);
}

ReebGraph graph_with_anchors(const std::vector<GeoPoint>& anchors) {
  ReebGraph g;
  g.tracks.push_back({"a", 0, 0, -1});
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    ReebNode n;
    n.id = static_cast<std::uint32_t>(i);
    n.members = {0};
    n.t_start = n.t_end = static_cast<std::int64_t>(i) * 60;
    n.centroid_path = {{n.t_start, anchors[i]}};
    NodeFeatures f;
    f.anchor = anchors[i];
    n.features = f;
    g.nodes.push_back(n);
  }
  return g;
}

// Seven days sharing home mornings and evenings, fanning out midday.
std::vector<GridTrack> week_days() {
  std::vector<GridTrack> out;
  for (int d = 0; d < 7; ++d) {
    std::vector<TimedPoint> pts = still(0, 8 * 3600 - 60, kHome);
    const GeoPoint away = offset_m(kHome, 2000.0 * std::cos(d * 0.9), 2000.0 * std::sin(d * 0.9));
    for (std::int64_t t = 8 * 3600; t < 9 * 3600; t += 60) {
      pts.push_back({t, lerp(kHome, away, static_cast<double>(t - 8 * 3600) / 3600.0)});
    }
    for (std::int64_t t = 9 * 3600; t < 17 * 3600; t += 60) pts.push_back({t, away});
    for (std::int64_t t = 17 * 3600; t < 18 * 3600; t += 60) {
      pts.push_back({t, lerp(away, kHome, static_cast<double>(t - 17 * 3600) / 3600.0)});
    }
    for (std::int64_t t = 18 * 3600; t < 24 * 3600; t += 60) pts.push_back({t, kHome});
    out.push_back(grid("a", d, pts));
  }
  return out;
}

std::set<std::tuple<std::vector<TrackId>, std::int64_t, std::int64_t>> node_set(const ReebGraph& g) {
  std::set<std::tuple<std::vector<TrackId>, std::int64_t, std::int64_t>> s;
  for (const auto& n : g.nodes) s.insert({n.members, n.t_start, n.t_end});
  return s;
}

}  // namespace

TEST_CASE("stop detection") {
  const StopParams p;
  SUBCASE("stationary day") {
    const auto stops = detect_stops(still(0, 86340, kHome), p);
    REQUIRE(stops.size() == 1);
    CHECK(stops[0].duration_s() == 86340);
  }
  SUBCASE("constant motion") { CHECK(detect_stops(drive(0, 3600, kHome, 10.0), p).empty()); }
  SUBCASE("still, drive, still") {
    auto pts = still(0, 7200, kHome);
    const auto d = drive(7260, 9000, offset_m(kHome, 600, 0), 10.0);
    pts.insert(pts.end(), d.begin(), d.end());
    const GeoPoint there = offset_m(kHome, 600.0 + 10.0 * 1740, 0.0);
    const auto s2 = still(9060, 12660, there);
    pts.insert(pts.end(), s2.begin(), s2.end());
    const auto stops = detect_stops(pts, p);
    REQUIRE(stops.size() == 2);
    CHECK(stops[0].duration_s() == 7200);
    CHECK(stops[1].duration_s() == 3660);  // arrival sample at t = 9000
    CHECK(haversine_m(stops[1].centroid, there) < 1.0);
  }
  SUBCASE("short pauses are not stops") {
    auto pts = drive(0, 600, kHome, 10.0);
    const auto pause = still(660, 840, pts.back().pos);
    pts.insert(pts.end(), pause.begin(), pause.end());
    CHECK(detect_stops(pts, p).empty());
  }
  CHECK_THROWS(StopParams{0.0, 300.0, 30.0}.validate());
}

TEST_CASE("mode estimation") {
  const std::vector<double> walk(20, 1.2);
  CHECK(estimate_mode(std::span<const double>(walk), 0.5) == ModeSet{static_cast<std::uint8_t>(Mode::kWalk)});
  const std::vector<std::vector<double>> mixed{std::vector<double>(10, 1.0), std::vector<double>(10, 20.0)};
  const ModeSet m = estimate_mode(std::span<const std::vector<double>>(mixed), 0.5);
  CHECK(m.contains(Mode::kWalk));
  CHECK(m.contains(Mode::kCar));
  CHECK_FALSE(m.contains(Mode::kBike));
  const std::vector<double> stopped(10, 0.1);
  CHECK(estimate_mode(std::span<const double>(stopped), 0.5).empty());
  const std::vector<double> bike(10, 6.0);
  CHECK(estimate_mode(std::span<const double>(bike), 0.5).contains(Mode::kBike));
}

TEST_CASE("feature annotation") {
  const StopParams p;
  SUBCASE("pure stop node") {
    const std::vector<GridTrack> tracks{grid("a", 0, still(0, 10800, kHome))};
    const ReebGraph g = annotate_features(build_terg(tracks, {}), tracks, p);
    REQUIRE(g.nodes.size() == 1);
    const NodeFeatures& f = *g.nodes[0].features;
    CHECK(f.max_stop_duration_s == doctest::Approx(10800));
    CHECK(f.max_velocity_mps == doctest::Approx(0.0));
    CHECK(f.modes.empty());
    CHECK(haversine_m(f.anchor, kHome) < 1e-6);
  }
  SUBCASE("fast segment") {
    const std::vector<GridTrack> tracks{grid("a", 0, drive(0, 1800, kHome, 25.0))};
    const ReebGraph g = annotate_features(build_terg(tracks, {}), tracks, p);
    const NodeFeatures& f = *g.nodes.at(0).features;
    CHECK(f.max_velocity_mps == doctest::Approx(25.0).epsilon(1e-3));
    CHECK(f.modes == ModeSet{static_cast<std::uint8_t>(Mode::kCar)});
    REQUIRE(f.mean_bearing_deg.has_value());
    CHECK(*f.mean_bearing_deg == doctest::Approx(90.0).epsilon(0.01));
  }
  SUBCASE("idempotent and bounded") {
    const auto tracks = week_days();
    const ReebGraph once = annotate_features(build_terg(tracks, {}), tracks, p);
    CHECK(annotate_features(once, tracks, p) == once);
    for (const auto& n : once.nodes) {
      CHECK(n.features->max_stop_duration_s <= static_cast<double>(n.t_end - n.t_start));
      CHECK(n.features->max_velocity_mps >= 0.0);
    }
  }
}

TEST_CASE("graph diameter") {
  CHECK(graph_diameter_m(graph_with_anchors({{0, 0}})) == 0.0);
  CHECK(graph_diameter_m(graph_with_anchors({{0, 0}, {0, 1}})) == doctest::Approx(111194.9).epsilon(1e-6));
  const std::vector<GeoPoint> three{{40, -75}, {40.2, -75.1}, {39.9, -74.7}};
  double best = 0.0;
  for (const auto& a : three) {
    for (const auto& b : three) best = std::max(best, oracle::great_circle_m(a, b));
  }
  CHECK(graph_diameter_m(graph_with_anchors(three)) == doctest::Approx(best).epsilon(1e-9));
  ReebGraph bare = graph_with_anchors({{0, 0}});
  bare.nodes[0].features.reset();
  CHECK_THROWS_WITH(graph_diameter_m(bare), "features required");
}

TEST_CASE("agent graph construction") {
  SUBCASE("single day is one node") {
    const std::vector<GridTrack> tracks{grid("a", 0, drive(0, 3600, kHome, 3.0))};
    const ReebGraph g = build_terg(tracks, {});
    REQUIRE(g.nodes.size() == 1);
    CHECK(g.edges.empty());
    CHECK(g.nodes[0].support == 1);
    CHECK(g.kind == GraphKind::kAgentTerg);
  }
  SUBCASE("far apart days stay disjoint") {
    const std::vector<GridTrack> tracks{grid("a", 0, still(0, 3600, kHome)),
                                        grid("a", 1, still(0, 3600, offset_m(kHome, 5000, 0)))};
    const ReebGraph g = build_terg(tracks, {});
    CHECK(g.nodes.size() == 2);
    CHECK(g.edges.empty());
  }
  SUBCASE("seven days fan out and back in") {
    const auto tracks = week_days();
    const ReebGraph g = build_terg(tracks, {});
    const auto oracle_tl = oracle::brute_timeline(tracks, 50.0, oracle::great_circle_m);
    std::set<std::tuple<std::vector<TrackId>, std::int64_t, std::int64_t>> expect;
    for (const auto& b : oracle_tl.bundles) expect.insert({b.members, b.t_start, b.t_end});
    CHECK(node_set(g) == expect);
    const std::vector<TrackId> all{0, 1, 2, 3, 4, 5, 6};
    CHECK(g.nodes.front().members == all);
    CHECK(g.nodes.back().members == all);
    CHECK(g.nodes.front().t_start == 0);
    CHECK(check_invariants(g).empty());
  }
  SUBCASE("random instances keep invariants and compress") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 25; ++i) {
      const auto tracks = oracle::random_tracks(rng, 8, 120);
      const ReebGraph g = build_terg(tracks, {});
      CHECK(check_invariants(g).empty());
      const Timeline tl = bundle_timeline(tracks, {});
      CHECK(g.nodes.size() <= 2 * tl.events.size() + tracks.size());
      // every edge joins consecutive intervals of a carried track
      for (const auto& e : g.edges) CHECK(g.nodes[e.from].t_end + g.stride_s == g.nodes[e.to].t_start);
    }
  }
  CHECK_THROWS(build_terg(std::vector<GridTrack>{}, {}));
}

TEST_CASE("graph serialization") {
  const auto tracks = week_days();
  const ReebGraph g = annotate_features(build_terg(tracks, {}), tracks, StopParams{});
  SUBCASE("binary round-trip") {
    const auto bytes = serialize(g);
    CHECK(deserialize(bytes) == g);
    CHECK(annotate_features(deserialize(bytes), tracks, StopParams{}) == g);
  }
  SUBCASE("json round-trip") { CHECK(graph_from_json(to_json(g)) == g); }
  SUBCASE("errors") {
    CHECK_THROWS_WITH(serialize(ReebGraph{}), "empty graph not serializable");
    auto bytes = serialize(g);
    bytes.resize(bytes.size() / 2);
    CHECK_THROWS_WITH(deserialize(bytes), "corrupt payload");
    auto flipped = serialize(g);
    flipped[flipped.size() / 2] ^= 0x5a;
    CHECK_THROWS_AS(deserialize(flipped), FormatError);
    auto versioned = serialize(g);
    versioned[4] = 99;
    CHECK_THROWS_WITH(deserialize(versioned), "version mismatch");
  }
  SUBCASE("files") {
    const auto dir = std::filesystem::temp_directory_path() / "polreeb_test_graphs";
    std::filesystem::create_directories(dir);
    save_graph(dir / "g.rg", g);
    save_graph(dir / "g.json", g, GraphFormat::kJson);
    CHECK(load_graph(dir / "g.rg") == g);
    CHECK(load_graph(dir / "g.json") == g);
  }
}
