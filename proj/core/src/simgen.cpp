#include "polreeb/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "polreeb/dataset_io.hpp"
#include "polreeb/error.hpp"
#include "polreeb/worker_pool.hpp"

namespace polreeb {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double quantize(double deg) { return std::round(deg * 1e7) / 1e7; }

GeoPoint uniform_point(std::mt19937_64& rng, const BBox& b, double margin_deg = 0.002) {
  std::uniform_real_distribution<double> lat(b.lat_min + margin_deg, b.lat_max - margin_deg);
  std::uniform_real_distribution<double> lon(b.lon_min + margin_deg, b.lon_max - margin_deg);
  return {lat(rng), lon(rng)};
}

GeoPoint leg_position(const Leg& leg, double t) {
  if (leg.from == leg.to || leg.t1 <= leg.t0) return leg.from;
  const double f = std::clamp((t - static_cast<double>(leg.t0)) / static_cast<double>(leg.t1 - leg.t0), 0.0, 1.0);
  return lerp(leg.from, leg.to, f);
}

std::int64_t travel_s(const GeoPoint& a, const GeoPoint& b, double speed) {
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(haversine_m(a, b) / speed)));
}

// Distance from p to segment ab in a local tangent plane at a.
double segment_distance_m(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b) {
  const double k = kEarthRadiusM * std::numbers::pi / 180.0;
  const double c = std::cos(deg_to_rad(a.lat_deg));
  const double bx = (b.lon_deg - a.lon_deg) * k * c, by = (b.lat_deg - a.lat_deg) * k;
  const double px = (p.lon_deg - a.lon_deg) * k * c, py = (p.lat_deg - a.lat_deg) * k;
  const double len2 = bx * bx + by * by;
  const double f = len2 > 0.0 ? std::clamp((px * bx + py * by) / len2, 0.0, 1.0) : 0.0;
  return std::hypot(px - f * bx, py - f * by);
}

class Sampler {
 public:
  Sampler(std::uint64_t seed, double sigma) : rng_(seed), noise_(0.0, sigma > 0.0 ? sigma : 1.0), sigma_(sigma) {}

  GeoPoint observe(const GeoPoint& truth) {
    if (sigma_ <= 0.0) return {quantize(truth.lat_deg), quantize(truth.lon_deg)};
    const double e = noise_(rng_);
    const double n = noise_(rng_);
    const GeoPoint p = offset_m(truth, e, n);
    return {quantize(p.lat_deg), quantize(p.lon_deg)};
  }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_;
  double sigma_;
};

void sample_legs(const std::vector<Leg>& legs, std::int64_t day_start, std::int64_t period, Sampler& s,
                 std::vector<TimedPoint>& out) {
  std::size_t li = 0;
  for (std::int64_t t = day_start; t < day_start + kSecondsPerDay; t += period) {
    while (li + 1 < legs.size() && t >= legs[li].t1) ++li;
    out.push_back({t, s.observe(leg_position(legs[li], static_cast<double>(t)))});
  }
}

AgentProfile make_profile(const WorldConfig& cfg, std::size_t index, const std::vector<GeoPoint>& workplaces,
                          const std::vector<GeoPoint>& pois, std::mt19937_64& rng) {
  AgentProfile p;
  p.agent_id = agent_name(index);
  p.home = uniform_point(rng, cfg.aoi);
  p.work = workplaces[std::uniform_int_distribution<std::size_t>(0, workplaces.size() - 1)(rng)];
  const std::size_t n_leisure = std::uniform_int_distribution<std::size_t>(1, 2)(rng);
  for (std::size_t i = 0; i < n_leisure && !pois.empty(); ++i) {
    p.leisure.push_back(pois[std::uniform_int_distribution<std::size_t>(0, pois.size() - 1)(rng)]);
  }
  const double commute_km = haversine_m(p.home, p.work) / 1000.0;
  p.mode = commute_km <= cfg.walk_max_km ? TravelMode::kWalk
           : commute_km <= cfg.bike_max_km ? TravelMode::kBike
                                           : TravelMode::kCar;
  const SpeedRange& r = p.mode == TravelMode::kWalk ? cfg.walk : p.mode == TravelMode::kBike ? cfg.bike : cfg.car;
  p.speed_mps = std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
  p.depart_s = std::uniform_int_distribution<std::int64_t>(7 * 3600, 8 * 3600 + 1800)(rng);
  p.work_s = std::uniform_int_distribution<std::int64_t>(8 * 3600, 9 * 3600)(rng);

  const auto jitter = static_cast<std::int64_t>(cfg.depart_jitter_min * 60.0);
  std::uniform_int_distribution<std::int64_t> jit(-jitter, jitter);
  std::bernoulli_distribution go_out(cfg.leisure_prob);
  const std::size_t n_days = cfg.n_days_train + cfg.n_days_test;
  for (std::size_t d = 0; d < n_days; ++d) {
    const std::int64_t day0 = cfg.start_epoch + static_cast<std::int64_t>(d) * kSecondsPerDay;
    const std::int64_t day1 = day0 + kSecondsPerDay;
    std::vector<Leg> legs;
    std::int64_t t = day0;
    GeoPoint at = p.home;
    auto stay_until = [&](std::int64_t until) {
      until = std::min(until, day1);
      if (until > t) legs.push_back({t, until, at, at});
      t = std::max(t, until);
    };
    auto go_to = [&](const GeoPoint& dest) {
      const std::int64_t arrive = std::min(day1, t + travel_s(at, dest, p.speed_mps));
      if (arrive > t) legs.push_back({t, arrive, at, dest});
      t = arrive;
      at = dest;
    };
    stay_until(day0 + p.depart_s + jit(rng));
    go_to(p.work);
    stay_until(t + p.work_s + jit(rng));
    const bool leisure = go_out(rng) && !p.leisure.empty();
    if (leisure) {
      const GeoPoint& dest = p.leisure[std::uniform_int_distribution<std::size_t>(0, p.leisure.size() - 1)(rng)];
      go_to(dest);
      stay_until(t + std::uniform_int_distribution<std::int64_t>(3600, 7200)(rng));
    }
    go_to(p.home);
    stay_until(day1);
    if (legs.empty() || legs.back().t1 < day1) legs.push_back({t, day1, at, at});
    p.days.push_back(std::move(legs));
  }
  return p;
}

}  // namespace

std::string_view to_string(TravelMode m) noexcept {
  switch (m) {
    case TravelMode::kWalk: return "walk";
    case TravelMode::kBike: return "bike";
    case TravelMode::kCar: return "car";
  }
  return "unknown";
}

void WorldConfig::validate() const {
  if (!(aoi.lat_min < aoi.lat_max) || !(aoi.lon_min < aoi.lon_max) || !aoi.contains({aoi.lat_min, aoi.lon_min}) ||
      !GeoPoint{aoi.lat_min, aoi.lon_min}.valid() || !GeoPoint{aoi.lat_max, aoi.lon_max}.valid()) {
    throw Error("aoi must be a nonempty lat/lon box");
  }
  if (n_agents < 1 || n_days_train < 1 || n_days_test < 1) throw Error("agent and day counts must be positive");
  if (sample_period_s < 1 || kSecondsPerDay % sample_period_s != 0) {
    throw Error("sample_period_s must divide a day");
  }
  if (!(gps_noise_sigma_m >= 0.0)) throw Error("gps_noise_sigma_m must be >= 0");
  for (const SpeedRange* r : {&walk, &bike, &car}) {
    if (!(r->lo > 0.0) || r->hi < r->lo) throw Error("speed ranges must be positive and ordered");
  }
  if (n_workplaces < 1) throw Error("n_workplaces must be >= 1");
  if (n_anomalous > n_agents) throw Error("more anomalous agents than agents");
  if (wlg_size < 2) throw Error("wlg_size must be >= 2");
  if (!(anomaly_dwell_s > 0.0)) throw Error("anomaly_dwell_s must be positive");
  if (anomaly_days > n_days_test) throw Error("anomaly_days exceeds test days");
}

void to_json(nlohmann::json& j, const WorldConfig& c) {
  auto range = [](const SpeedRange& r) { return nlohmann::json::array({r.lo, r.hi}); };
  j = nlohmann::json{
      {"aoi", {{"lat_min", c.aoi.lat_min}, {"lat_max", c.aoi.lat_max}, {"lon_min", c.aoi.lon_min}, {"lon_max", c.aoi.lon_max}}},
      {"n_agents", c.n_agents},
      {"n_days_train", c.n_days_train},
      {"n_days_test", c.n_days_test},
      {"sample_period_s", c.sample_period_s},
      {"speed_walk_mps", range(c.walk)},
      {"speed_bike_mps", range(c.bike)},
      {"speed_car_mps", range(c.car)},
      {"gps_noise_sigma_m", c.gps_noise_sigma_m},
      {"rng_seed", c.rng_seed},
      {"start_epoch", c.start_epoch},
      {"tz_offset_s", c.tz_offset_s},
      {"n_workplaces", c.n_workplaces},
      {"n_leisure_pois", c.n_leisure_pois},
      {"leisure_prob", c.leisure_prob},
      {"walk_max_km", c.walk_max_km},
      {"bike_max_km", c.bike_max_km},
      {"depart_jitter_min", c.depart_jitter_min},
      {"n_anomalous", c.n_anomalous},
      {"wlg_size", c.wlg_size},
      {"anomaly_dwell_s", c.anomaly_dwell_s},
      {"anomaly_days", c.anomaly_days},
      {"anomaly_min_clearance_m", c.anomaly_min_clearance_m},
  };
}

void from_json(const nlohmann::json& j, WorldConfig& c) {
  auto opt = [&](const char* key, auto& v) {
    if (j.contains(key)) j.at(key).get_to(v);
  };
  auto range = [&](const char* key, SpeedRange& r) {
    if (!j.contains(key)) return;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 2) throw Error(std::string(key) + " must be [lo, hi]");
    r = {a[0].get<double>(), a[1].get<double>()};
  };
  if (j.contains("aoi")) {
    const auto& b = j.at("aoi");
    b.at("lat_min").get_to(c.aoi.lat_min);
    b.at("lat_max").get_to(c.aoi.lat_max);
    b.at("lon_min").get_to(c.aoi.lon_min);
    b.at("lon_max").get_to(c.aoi.lon_max);
  }
  opt("n_agents", c.n_agents);
  opt("n_days_train", c.n_days_train);
  opt("n_days_test", c.n_days_test);
  opt("sample_period_s", c.sample_period_s);
  range("speed_walk_mps", c.walk);
  range("speed_bike_mps", c.bike);
  range("speed_car_mps", c.car);
  opt("gps_noise_sigma_m", c.gps_noise_sigma_m);
  opt("rng_seed", c.rng_seed);
  opt("start_epoch", c.start_epoch);
  opt("tz_offset_s", c.tz_offset_s);
  opt("n_workplaces", c.n_workplaces);
  opt("n_leisure_pois", c.n_leisure_pois);
  opt("leisure_prob", c.leisure_prob);
  opt("walk_max_km", c.walk_max_km);
  opt("bike_max_km", c.bike_max_km);
  opt("depart_jitter_min", c.depart_jitter_min);
  opt("n_anomalous", c.n_anomalous);
  opt("wlg_size", c.wlg_size);
  opt("anomaly_dwell_s", c.anomaly_dwell_s);
  opt("anomaly_days", c.anomaly_days);
  opt("anomaly_min_clearance_m", c.anomaly_min_clearance_m);
}

bool AnomalySpec::in_box(const GeoPoint& p, double slack_m) const noexcept {
  const double k = kEarthRadiusM * std::numbers::pi / 180.0;
  const double east = (p.lon_deg - box_center.lon_deg) * k * std::cos(deg_to_rad(box_center.lat_deg));
  const double north = (p.lat_deg - box_center.lat_deg) * k;
  return std::abs(east) <= half_width_m + slack_m && std::abs(north) <= half_width_m + slack_m;
}

std::string agent_name(std::size_t index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 4) digits.insert(0, 4 - digits.size(), '0');
  return "agent_" + digits;
}

std::uint64_t child_seed(std::uint64_t seed, std::string_view key) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : key) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(seed ^ splitmix64(h));
}

Population generate_population(const WorldConfig& cfg, std::size_t workers) {
  cfg.validate();
  std::mt19937_64 world(child_seed(cfg.rng_seed, "world"));
  std::vector<GeoPoint> workplaces, pois;
  for (std::size_t i = 0; i < cfg.n_workplaces; ++i) workplaces.push_back(uniform_point(world, cfg.aoi));
  for (std::size_t i = 0; i < cfg.n_leisure_pois; ++i) pois.push_back(uniform_point(world, cfg.aoi));

  Population pop;
  pop.trajectories.resize(cfg.n_agents);
  pop.profiles.resize(cfg.n_agents);
  parallel_for(cfg.n_agents, workers, [&](std::size_t i) {
    const std::string id = agent_name(i);
    std::mt19937_64 rng(child_seed(cfg.rng_seed, id));
    AgentProfile prof = make_profile(cfg, i, workplaces, pois, rng);
    Sampler sampler(child_seed(cfg.rng_seed, id + "/noise"), cfg.gps_noise_sigma_m);
    std::vector<TimedPoint> pts;
    pts.reserve(prof.days.size() * static_cast<std::size_t>(kSecondsPerDay / cfg.sample_period_s));
    for (std::size_t d = 0; d < prof.days.size(); ++d) {
      sample_legs(prof.days[d], cfg.start_epoch + static_cast<std::int64_t>(d) * kSecondsPerDay,
                  cfg.sample_period_s, sampler, pts);
    }
    pop.trajectories[i] = AgentTrajectory{id, std::move(pts)};
    pop.profiles[i] = std::move(prof);
  });
  return pop;
}

std::pair<AgentTrajectory, std::vector<AnomalyInterval>> inject_anomaly(const AgentTrajectory& traj,
                                                                        const AgentProfile& profile,
                                                                        const AnomalySpec& spec,
                                                                        const WorldConfig& cfg,
                                                                        std::uint64_t seed) {
  if (!(spec.dwell_s > 0.0)) throw Error("dwell_s must be positive");
  std::mt19937_64 rng(seed);
  Sampler sampler(splitmix64(seed), cfg.gps_noise_sigma_m);
  std::uniform_real_distribution<double> inside(-10.0, 10.0);
  AgentTrajectory out = traj;
  std::vector<AnomalyInterval> intervals;
  const auto dwell = static_cast<std::int64_t>(std::ceil(spec.dwell_s));
  for (std::size_t d : spec.active_days) {
    if (d < cfg.n_days_train || d >= cfg.n_days_train + cfg.n_days_test || d >= profile.days.size()) {
      throw Error("anomaly day outside the test month");
    }
    const std::int64_t day0 = cfg.start_epoch + static_cast<std::int64_t>(d) * kSecondsPerDay;
    const auto& legs = profile.days[d];
    const auto work = std::find_if(legs.begin(), legs.end(),
                                   [&](const Leg& l) { return l.from == profile.work && l.to == profile.work; });
    if (work == legs.end()) throw Error("infeasible anomaly");
    const GeoPoint spot = offset_m(spec.box_center, inside(rng), inside(rng));
    const std::int64_t trip = travel_s(profile.work, spot, profile.speed_mps);
    const std::int64_t w0 = std::max(work->t0, day0 + spec.window_start_s);
    const std::int64_t w1 = std::min(work->t1, day0 + spec.window_end_s);
    const std::int64_t latest_leave = std::min(w1, work->t1 - (2 * trip + dwell));
    if (latest_leave < w0) throw Error("infeasible anomaly");
    const std::int64_t t_leave = std::uniform_int_distribution<std::int64_t>(w0, latest_leave)(rng);
    const std::vector<Leg> detour{{t_leave, t_leave + trip, profile.work, spot},
                                  {t_leave + trip, t_leave + trip + dwell, spot, spot},
                                  {t_leave + trip + dwell, t_leave + 2 * trip + dwell, spot, profile.work}};
    AnomalyInterval iv{traj.agent_id, d, 0, 0, t_leave + trip, t_leave + trip + dwell};
    bool any = false;
    for (TimedPoint& p : out.points) {
      if (p.t < t_leave || p.t > detour.back().t1) continue;
      const Leg& leg = p.t < detour[0].t1 ? detour[0] : p.t < detour[1].t1 ? detour[1] : detour[2];
      p.pos = sampler.observe(leg_position(leg, static_cast<double>(p.t)));
      if (!any) iv.splice_start = p.t;
      iv.splice_end = p.t;
      any = true;
    }
    if (any) intervals.push_back(iv);
  }
  return {std::move(out), std::move(intervals)};
}

WlgAssignment assign_wlgs(std::vector<std::string> agent_ids, std::size_t g,
                          const std::vector<std::string>& anomalous, std::uint64_t seed) {
  if (g < 2) throw Error("group size must be >= 2");
  std::sort(agent_ids.begin(), agent_ids.end());
  agent_ids.erase(std::unique(agent_ids.begin(), agent_ids.end()), agent_ids.end());
  std::mt19937_64 rng(seed);
  const std::size_t n = agent_ids.size();
  const std::size_t groups = (n + g - 1) / g;
  std::vector<std::size_t> capacity(groups, g);
  if (groups > 0) capacity.back() = n - g * (groups - 1);

  std::vector<std::string> anom(anomalous.begin(), anomalous.end());
  std::sort(anom.begin(), anom.end());
  anom.erase(std::unique(anom.begin(), anom.end()), anom.end());
  std::vector<std::string> normal;
  std::set_difference(agent_ids.begin(), agent_ids.end(), anom.begin(), anom.end(), std::back_inserter(normal));
  std::shuffle(normal.begin(), normal.end(), rng);
  std::vector<std::size_t> order(groups);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  auto group_name = [](std::size_t k) {
    std::string s = std::to_string(k);
    if (s.size() < 3) s.insert(0, 3 - s.size(), '0');
    return "wlg_" + s;
  };
  WlgAssignment out;
  std::size_t cursor = 0;
  for (const std::string& a : anom) {
    if (!std::binary_search(agent_ids.begin(), agent_ids.end(), a)) continue;
    for (std::size_t tries = 0; tries < groups; ++tries, ++cursor) {
      const std::size_t k = order[cursor % groups];
      if (capacity[k] > 0) {
        --capacity[k];
        out[a] = group_name(k);
        ++cursor;
        break;
      }
    }
  }
  std::size_t next = 0;
  for (std::size_t k = 0; k < groups; ++k) {
    for (; capacity[k] > 0; --capacity[k]) out[normal[next++]] = group_name(k);
  }
  return out;
}

Dataset simulate(const WorldConfig& cfg, std::size_t workers) {
  Dataset ds;
  ds.config = cfg;
  ds.population = generate_population(cfg, workers);
  auto& pop = ds.population;

  std::mt19937_64 rng(child_seed(cfg.rng_seed, "anomalies"));
  std::vector<std::size_t> idx(cfg.n_agents);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(cfg.n_anomalous);
  std::sort(idx.begin(), idx.end());

  std::vector<GeoPoint> anchors;
  for (const AgentProfile& p : pop.profiles) {
    anchors.push_back(p.home);
    anchors.push_back(p.work);
    anchors.insert(anchors.end(), p.leisure.begin(), p.leisure.end());
  }
  for (std::size_t i : idx) {
    const AgentProfile& prof = pop.profiles[i];
    AnomalySpec spec;
    spec.dwell_s = cfg.anomaly_dwell_s;
    const double reach = prof.speed_mps *
                         (static_cast<double>(spec.window_end_s - spec.window_start_s) - spec.dwell_s) * 0.4;
    bool placed = false;
    for (int tries = 0; tries < 20000 && !placed; ++tries) {
      const GeoPoint c = uniform_point(rng, cfg.aoi, 0.003);
      if (haversine_m(c, prof.work) > reach) continue;
      const bool clear = std::all_of(anchors.begin(), anchors.end(), [&](const GeoPoint& a) {
        return haversine_m(a, c) >= cfg.anomaly_min_clearance_m;
      });
      if (!clear) continue;
      bool off_route = segment_distance_m(c, prof.home, prof.work) >= 300.0;
      for (const GeoPoint& l : prof.leisure) {
        off_route = off_route && segment_distance_m(c, prof.work, l) >= 300.0 &&
                    segment_distance_m(c, l, prof.home) >= 300.0;
      }
      if (!off_route) continue;
      spec.box_center = c;
      placed = true;
    }
    if (!placed) throw Error("no room for an anomaly box for " + prof.agent_id);
    std::vector<std::size_t> days(cfg.n_days_test);
    std::iota(days.begin(), days.end(), cfg.n_days_train);
    std::shuffle(days.begin(), days.end(), rng);
    days.resize(cfg.anomaly_days);
    std::sort(days.begin(), days.end());
    spec.active_days = days;

    auto [traj, ivs] = inject_anomaly(pop.trajectories[i], prof, spec, cfg,
                                      child_seed(cfg.rng_seed, prof.agent_id + "/anomaly"));
    pop.trajectories[i] = std::move(traj);
    ds.truth.anomalous.push_back(prof.agent_id);
    ds.truth.specs.push_back(spec);
    ds.truth.intervals.insert(ds.truth.intervals.end(), ivs.begin(), ivs.end());
  }
  std::vector<std::string> ids;
  for (const auto& t : pop.trajectories) ids.push_back(t.agent_id);
  ds.truth.wlg = assign_wlgs(ids, cfg.wlg_size, ds.truth.anomalous, child_seed(cfg.rng_seed, "wlg"));
  return ds;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& root, std::size_t workers) {
  namespace fs = std::filesystem;
  fs::create_directories(root / "agents");
  const auto& trajs = ds.population.trajectories;
  parallel_for(trajs.size(), workers, [&](std::size_t i) {
    write_agent_csv(agent_csv_path(root, trajs[i].agent_id), trajs[i]);
  });
  std::string anom = "agent_id,box_lat,box_lon,half_width_m,dwell_s\n";
  for (std::size_t i = 0; i < ds.truth.anomalous.size(); ++i) {
    const AnomalySpec& s = ds.truth.specs[i];
    anom += ds.truth.anomalous[i] + ',' + format_double(s.box_center.lat_deg) + ',' +
            format_double(s.box_center.lon_deg) + ',' + format_double(s.half_width_m) + ',' +
            format_double(s.dwell_s) + '\n';
  }
  write_text_atomic(root / "truth" / "anomalous_agents.csv", anom);
  std::string iv = "agent_id,day_index,splice_start,splice_end,dwell_start,dwell_end\n";
  for (const AnomalyInterval& a : ds.truth.intervals) {
    iv += a.agent_id + ',' + std::to_string(a.day_index) + ',' + std::to_string(a.splice_start) + ',' +
          std::to_string(a.splice_end) + ',' + std::to_string(a.dwell_start) + ',' + std::to_string(a.dwell_end) + '\n';
  }
  write_text_atomic(root / "truth" / "intervals.csv", iv);
  write_wlg_csv(root / "wlg" / "groups.csv", ds.truth.wlg);
  write_text_atomic(root / "config.json", nlohmann::json(ds.config).dump(2) + '\n');
}

}  // namespace polreeb
