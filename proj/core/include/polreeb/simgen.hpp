#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "polreeb/scoring.hpp"
#include "polreeb/trajectory.hpp"

namespace polreeb {

struct BBox {
  double lat_min = 40.0;
  double lat_max = 40.1;
  double lon_min = -75.1;
  double lon_max = -75.0;

  bool contains(const GeoPoint& p) const noexcept {
    return p.lat_deg >= lat_min && p.lat_deg <= lat_max && p.lon_deg >= lon_min && p.lon_deg <= lon_max;
  }
};

struct SpeedRange {
  double lo = 1.0;
  double hi = 1.5;
};

enum class TravelMode : std::uint8_t { kWalk, kBike, kCar };

std::string_view to_string(TravelMode m) noexcept;

struct WorldConfig {
  BBox aoi;
  std::size_t n_agents = 200;
  std::size_t n_days_train = 14;
  std::size_t n_days_test = 7;
  std::int64_t sample_period_s = 60;
  SpeedRange walk{1.0, 1.6};
  SpeedRange bike{3.5, 6.0};
  SpeedRange car{9.0, 14.0};
  double gps_noise_sigma_m = 5.0;
  std::uint64_t rng_seed = 20240917;
  std::int64_t start_epoch = 1704067200;  // a local midnight
  std::int64_t tz_offset_s = 0;

  std::size_t n_workplaces = 20;
  std::size_t n_leisure_pois = 30;
  double leisure_prob = 0.4;
  double walk_max_km = 1.2;  // commute length deciding the agent's mode
  double bike_max_km = 4.0;
  double depart_jitter_min = 15.0;

  // Scripted anomalies and weak labels.
  std::size_t n_anomalous = 5;
  std::size_t wlg_size = 20;
  double anomaly_dwell_s = 2700.0;
  std::size_t anomaly_days = 2;  // active test days per anomalous agent
  double anomaly_min_clearance_m = 400.0;

  void validate() const;
  std::int64_t split_epoch() const noexcept {
    return start_epoch + static_cast<std::int64_t>(n_days_train) * kSecondsPerDay;
  }
};

void to_json(nlohmann::json& j, const WorldConfig& c);
void from_json(const nlohmann::json& j, WorldConfig& c);

// One piece of a day: stationary when from == to, else straight-line travel.
struct Leg {
  std::int64_t t0 = 0;  // epoch seconds, inclusive
  std::int64_t t1 = 0;  // exclusive
  GeoPoint from;
  GeoPoint to;
};

struct AgentProfile {
  std::string agent_id;
  GeoPoint home;
  GeoPoint work;
  std::vector<GeoPoint> leisure;
  TravelMode mode = TravelMode::kCar;
  double speed_mps = 10.0;
  std::int64_t depart_s = 8 * 3600;  // base departure, seconds after midnight
  std::int64_t work_s = 8 * 3600;    // base time at work
  std::vector<std::vector<Leg>> days;  // per day, covering [midnight, next midnight)
};

struct AnomalySpec {
  GeoPoint box_center;
  double half_width_m = 25.0;
  double dwell_s = 1800.0;
  std::vector<std::size_t> active_days;  // dataset day indices (test month only)
  std::int64_t window_start_s = 10 * 3600;  // entry window, seconds after midnight
  std::int64_t window_end_s = 14 * 3600;

  bool in_box(const GeoPoint& p, double slack_m = 0.0) const noexcept;
};

struct AnomalyInterval {
  std::string agent_id;
  std::size_t day_index = 0;  // dataset day ordinal
  std::int64_t splice_start = 0;  // first and last replaced sample, epoch seconds
  std::int64_t splice_end = 0;
  std::int64_t dwell_start = 0;
  std::int64_t dwell_end = 0;
};

struct GroundTruth {
  std::vector<std::string> anomalous;
  std::vector<AnomalyInterval> intervals;
  std::vector<AnomalySpec> specs;  // parallel to `anomalous`
  WlgAssignment wlg;
};

struct Population {
  std::vector<AgentTrajectory> trajectories;
  std::vector<AgentProfile> profiles;
};

// Agent ids are "agent_0000", "agent_0001", ... in generation order.
std::string agent_name(std::size_t index);

// Deterministic per-agent seed from the world seed and the agent id.
std::uint64_t child_seed(std::uint64_t seed, std::string_view key);

Population generate_population(const WorldConfig& cfg, std::size_t workers = 1);

// Splices a detour to the box into each active day while the agent sits at
// work. Throws "infeasible anomaly" when the trip cannot fit.
std::pair<AgentTrajectory, std::vector<AnomalyInterval>> inject_anomaly(const AgentTrajectory& traj,
                                                                        const AgentProfile& profile,
                                                                        const AnomalySpec& spec,
                                                                        const WorldConfig& cfg,
                                                                        std::uint64_t seed);

// Random partition into groups of g (the last may be smaller); anomalous
// agents are spread over distinct groups while groups remain.
WlgAssignment assign_wlgs(std::vector<std::string> agent_ids, std::size_t g,
                          const std::vector<std::string>& anomalous, std::uint64_t seed);

struct Dataset {
  WorldConfig config;
  Population population;
  GroundTruth truth;
};

// Population, anomalies and weak labels from one config.
Dataset simulate(const WorldConfig& cfg, std::size_t workers = 1);

void write_dataset(const Dataset& ds, const std::filesystem::path& root, std::size_t workers = 1);

}  // namespace polreeb
