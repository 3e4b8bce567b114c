#include <doctest.h>

#include <filesystem>
#include <set>

#include "polreeb/dataset_io.hpp"
#include "polreeb/error.hpp"
#include "polreeb/simgen.hpp"

using namespace polreeb;

namespace {

WorldConfig small_world() {
  WorldConfig c;
  c.n_agents = 12;
  c.n_days_train = 3;
  c.n_days_test = 2;
  c.n_anomalous = 2;
  c.anomaly_days = 1;
  c.wlg_size = 4;
  c.n_workplaces = 4;
  c.n_leisure_pois = 5;
  return c;
}

double max_step_speed(const AgentTrajectory& t) {
  double v = 0.0;
  for (std::size_t i = 1; i < t.points.size(); ++i) v = std::max(v, speed_mps(t.points[i - 1], t.points[i]));
  return v;
}

}  // namespace

TEST_CASE("population generation") {
  SUBCASE("deterministic under seed") {
    const WorldConfig c = small_world();
    const Population a = generate_population(c, 1);
    const Population b = generate_population(c, 3);
    REQUIRE(a.trajectories.size() == c.n_agents);
    for (std::size_t i = 0; i < a.trajectories.size(); ++i) CHECK(a.trajectories[i].points == b.trajectories[i].points);
    WorldConfig other = c;
    other.rng_seed += 1;
    CHECK(generate_population(other).trajectories[0].points != a.trajectories[0].points);
  }
  SUBCASE("noise-free walkers never exceed walking speed") {
    WorldConfig c = small_world();
    c.gps_noise_sigma_m = 0.0;
    c.walk_max_km = 1000.0;
    const Population p = generate_population(c);
    for (std::size_t i = 0; i < p.trajectories.size(); ++i) {
      CHECK(p.profiles[i].mode == TravelMode::kWalk);
      CHECK(max_step_speed(p.trajectories[i]) <= c.walk.hi * 1.001);
    }
  }
  SUBCASE("1 Hz point count") {
    WorldConfig c = small_world();
    c.n_agents = 2;
    c.n_days_train = 2;
    c.n_days_test = 1;
    c.n_anomalous = 0;
    c.sample_period_s = 1;
    const Population p = generate_population(c);
    for (const auto& t : p.trajectories) CHECK(t.points.size() == 3 * 86400);
  }
  SUBCASE("anchors stay inside the area") {
    const WorldConfig c = small_world();
    for (const auto& prof : generate_population(c).profiles) {
      CHECK(c.aoi.contains(prof.home));
      CHECK(c.aoi.contains(prof.work));
      for (const auto& l : prof.leisure) CHECK(c.aoi.contains(l));
    }
  }
}

TEST_CASE("anomaly injection") {
  WorldConfig c = small_world();
  c.sample_period_s = 1;
  c.n_agents = 3;
  c.bike_max_km = 0.0;
  c.walk_max_km = 0.0;  // everyone drives
  const Population p = generate_population(c);
  const AgentProfile& prof = p.profiles[0];
  REQUIRE(prof.mode == TravelMode::kCar);
  AnomalySpec spec;
  spec.box_center = offset_m(prof.work, 900.0, 400.0);
  spec.dwell_s = 1800.0;
  spec.active_days = {c.n_days_train};
  const auto [traj, ivs] = inject_anomaly(p.trajectories[0], prof, spec, c, 42);
  REQUIRE(ivs.size() == 1);
  const AnomalyInterval& iv = ivs[0];
  CHECK(iv.dwell_end - iv.dwell_start >= 1800);
  CHECK(iv.splice_start <= iv.dwell_start);
  CHECK(iv.dwell_end <= iv.splice_end);
  const double slack = 3.0 * c.gps_noise_sigma_m;
  std::int64_t run = 0, best = 0;
  std::size_t changed_outside = 0;
  for (std::size_t i = 0; i < traj.points.size(); ++i) {
    const auto& pt = traj.points[i];
    if (pt.t >= iv.dwell_start && pt.t <= iv.dwell_end) CHECK(spec.in_box(pt.pos, slack));
    run = spec.in_box(pt.pos, slack) ? run + 1 : 0;
    best = std::max(best, run);
    if ((pt.t < iv.splice_start || pt.t > iv.splice_end) && !(pt.pos == p.trajectories[0].points[i].pos)) ++changed_outside;
  }
  CHECK(best >= 1800);
  CHECK(changed_outside == 0);
  // continuity at the splice edges
  for (std::size_t i = 1; i < traj.points.size(); ++i) {
    const auto t = traj.points[i].t;
    if (t == iv.splice_start || t == iv.splice_end + 1) {
      CHECK(haversine_m(traj.points[i - 1].pos, traj.points[i].pos) <= prof.speed_mps * 1.0 + 6.0 * c.gps_noise_sigma_m);
    }
  }
  SUBCASE("no active days leaves the trajectory unchanged") {
    AnomalySpec none = spec;
    none.active_days.clear();
    const auto [same, empty] = inject_anomaly(p.trajectories[0], prof, none, c, 42);
    CHECK(same.points == p.trajectories[0].points);
    CHECK(empty.empty());
  }
  SUBCASE("unreachable box") {
    AnomalySpec far = spec;
    far.box_center = offset_m(prof.work, 400000.0, 0.0);
    CHECK_THROWS_WITH(inject_anomaly(p.trajectories[0], prof, far, c, 42), "infeasible anomaly");
  }
  SUBCASE("training days are refused") {
    AnomalySpec early = spec;
    early.active_days = {0};
    CHECK_THROWS(inject_anomaly(p.trajectories[0], prof, early, c, 42));
  }
}

TEST_CASE("weak-label groups") {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back(agent_name(static_cast<std::size_t>(i)));
  const auto wlg = assign_wlgs(ids, 5, {"agent_0003"}, 1);
  std::map<std::string, int> sizes;
  for (const auto& [a, g] : wlg) ++sizes[g];
  CHECK(sizes.size() == 2);
  for (const auto& [g, n] : sizes) CHECK(n == 5);
  CHECK(wlg.contains("agent_0003"));
  CHECK(assign_wlgs(ids, 5, {"agent_0003"}, 1) == wlg);
  const auto uneven = assign_wlgs(ids, 4, {}, 2);
  std::map<std::string, int> us;
  for (const auto& [a, g] : uneven) ++us[g];
  CHECK(us.size() == 3);
  CHECK_THROWS(assign_wlgs(ids, 1, {}, 1));
}

TEST_CASE("full simulation and dataset files") {
  const WorldConfig c = small_world();
  const Dataset ds = simulate(c);
  CHECK(ds.truth.anomalous.size() == c.n_anomalous);
  std::set<std::string> groups_with_anomaly;
  for (const auto& a : ds.truth.anomalous) groups_with_anomaly.insert(ds.truth.wlg.at(a));
  CHECK(groups_with_anomaly.size() == c.n_anomalous);
  for (const auto& iv : ds.truth.intervals) {
    CHECK(iv.splice_start >= c.split_epoch());
    CHECK(iv.splice_end < c.split_epoch() + static_cast<std::int64_t>(c.n_days_test) * kSecondsPerDay);
  }
  const auto root = std::filesystem::temp_directory_path() / "polreeb_test_sim";
  std::filesystem::remove_all(root);
  write_dataset(ds, root);
  CHECK(list_agents(root).size() == c.n_agents);
  CHECK(read_id_list(root / "truth" / "anomalous_agents.csv").size() == c.n_anomalous);
  CHECK(read_wlg_csv(root / "wlg" / "groups.csv") == ds.truth.wlg);
  for (std::size_t i = 0; i < c.n_agents; ++i) {
    const auto& t = ds.population.trajectories[i];
    CHECK(read_agent_csv(agent_csv_path(root, t.agent_id)).points == t.points);
  }
  const WorldConfig back = nlohmann::json::parse(read_text(root / "config.json")).get<WorldConfig>();
  const Dataset again = simulate(back);
  for (std::size_t i = 0; i < c.n_agents; ++i) {
    CHECK(again.population.trajectories[i].points == ds.population.trajectories[i].points);
  }
  CHECK(again.truth.anomalous == ds.truth.anomalous);
}
