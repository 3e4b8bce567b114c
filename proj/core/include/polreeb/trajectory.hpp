#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "polreeb/geo.hpp"

namespace polreeb {

inline constexpr std::int64_t kSecondsPerDay = 86'400;

// floor(a / b) for b > 0.
constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  const std::int64_t q = a / b;
  return (a % b != 0 && a < 0) ? q - 1 : q;
}

// A whole agent's fixes prior to daily segmentation. Strictly increasing in t.
struct AgentTrajectory {
  std::string agent_id;
  std::vector<TimedPoint> points;

  // Validates ordering and coordinates; throws polreeb::Error.
  static AgentTrajectory make(std::string agent_id, std::vector<TimedPoint> points);
};

// One local day of an agent's movement.
struct SubTrajectory {
  std::string agent_id;
  std::int32_t day_index = 0;   // local day ordinal counted from the epoch
  std::int64_t day_start = 0;   // epoch seconds of the local midnight opening the day
  std::vector<TimedPoint> points;

  static SubTrajectory make(std::string agent_id, std::int32_t day_index, std::int64_t day_start,
                            std::vector<TimedPoint> points);
};

struct ResampleSpec {
  std::int64_t stride_s = 60;
  std::int64_t max_gap_s = 600;

  void validate() const;
};

// A sub-trajectory sampled on the regular grid {day_start + k * stride_s}.
// Slot k (absolute, k >= 0) has grid time k * stride_s seconds after day_start;
// grid times are what the event machinery compares, so tracks from different
// days line up by time of day.
struct GridTrack {
  std::string agent_id;
  std::int32_t day_index = 0;
  std::int64_t day_start = 0;
  std::int64_t stride_s = 60;
  std::int64_t first_slot = 0;
  std::vector<GeoPoint> pos;
  std::vector<std::uint8_t> present;  // same length as pos; 0 marks an absent slot

  std::int64_t size() const noexcept { return static_cast<std::int64_t>(pos.size()); }
  bool empty() const noexcept { return pos.empty(); }
  std::int64_t last_slot() const noexcept { return first_slot + size() - 1; }
  std::int64_t grid_time(std::int64_t slot) const noexcept { return slot * stride_s; }

  bool covers(std::int64_t slot) const noexcept {
    return slot >= first_slot && slot <= last_slot();
  }
  bool present_at(std::int64_t slot) const noexcept {
    return covers(slot) && present[static_cast<std::size_t>(slot - first_slot)] != 0;
  }
  const GeoPoint& at(std::int64_t slot) const noexcept {
    return pos[static_cast<std::size_t>(slot - first_slot)];
  }

  // Present slots as timed points. With epoch = false, t is the grid time of day.
  std::vector<TimedPoint> present_points(bool epoch = false) const;

  // Builds a gap-free track from grid-aligned samples (t = grid time of day).
  static GridTrack from_grid_points(std::string agent_id, std::int32_t day_index,
                                    std::int64_t stride_s, std::span<const TimedPoint> points);
};

// Splits at local midnight. tz_offset_s is added to UTC to obtain local time.
std::vector<SubTrajectory> segment_daily(const AgentTrajectory& traj, std::int64_t tz_offset_s);

// Places a sub-trajectory on the stride grid. Slots between the first and last
// sample are linearly interpolated unless the bracketing samples are more than
// max_gap_s apart, in which case they are absent.
GridTrack resample(const SubTrajectory& st, const ResampleSpec& spec);

// Present grid samples back as a sub-trajectory with epoch timestamps.
SubTrajectory to_subtrajectory(const GridTrack& track);

}  // namespace polreeb
