#include "polreeb/trajectory.hpp"

#include <string>
#include <utility>

#include "polreeb/error.hpp"

namespace polreeb {
namespace {

void check_points(std::span<const TimedPoint> points) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].pos.valid()) {
      throw Error("invalid coordinate at index " + std::to_string(i));
    }
    if (points[i].t < 0) throw Error("negative timestamp at index " + std::to_string(i));
    if (i > 0 && points[i].t <= points[i - 1].t) {
      throw Error("timestamps not strictly increasing at index " + std::to_string(i));
    }
  }
}

}  // namespace

AgentTrajectory AgentTrajectory::make(std::string agent_id, std::vector<TimedPoint> points) {
  check_points(points);
  return AgentTrajectory{std::move(agent_id), std::move(points)};
}

SubTrajectory SubTrajectory::make(std::string agent_id, std::int32_t day_index,
                                  std::int64_t day_start, std::vector<TimedPoint> points) {
  if (points.empty()) throw Error("empty sub-trajectory");
  check_points(points);
  if (points.front().t < day_start || points.back().t >= day_start + kSecondsPerDay) {
    throw Error("sub-trajectory points outside its day");
  }
  return SubTrajectory{std::move(agent_id), day_index, day_start, std::move(points)};
}

void ResampleSpec::validate() const {
  if (stride_s < 1) throw Error("stride_s must be >= 1");
  if (max_gap_s < stride_s) throw Error("max_gap_s must be >= stride_s");
}

std::vector<TimedPoint> GridTrack::present_points(bool epoch) const {
  std::vector<TimedPoint> out;
  out.reserve(pos.size());
  for (std::int64_t i = 0; i < size(); ++i) {
    if (!present[static_cast<std::size_t>(i)]) continue;
    const std::int64_t t = grid_time(first_slot + i) + (epoch ? day_start : 0);
    out.push_back({t, pos[static_cast<std::size_t>(i)]});
  }
  return out;
}

GridTrack GridTrack::from_grid_points(std::string agent_id, std::int32_t day_index,
                                      std::int64_t stride_s, std::span<const TimedPoint> points) {
  if (points.empty()) throw Error("empty input");
  if (stride_s < 1) throw Error("stride_s must be >= 1");
  GridTrack g;
  g.agent_id = std::move(agent_id);
  g.day_index = day_index;
  g.stride_s = stride_s;
  g.first_slot = floor_div(points.front().t, stride_s);
  const std::int64_t last = floor_div(points.back().t, stride_s);
  g.pos.assign(static_cast<std::size_t>(last - g.first_slot + 1), GeoPoint{});
  g.present.assign(g.pos.size(), 0);
  for (const TimedPoint& p : points) {
    if (p.t % stride_s != 0) throw Error("point not on grid");
    const auto i = static_cast<std::size_t>(p.t / stride_s - g.first_slot);
    g.pos[i] = p.pos;
    g.present[i] = 1;
  }
  return g;
}

std::vector<SubTrajectory> segment_daily(const AgentTrajectory& traj, std::int64_t tz_offset_s) {
  if (traj.points.empty()) throw Error("empty input");
  std::vector<SubTrajectory> out;
  for (const TimedPoint& p : traj.points) {
    const std::int64_t day = floor_div(p.t + tz_offset_s, kSecondsPerDay);
    if (out.empty() || out.back().day_index != day) {
      SubTrajectory st;
      st.agent_id = traj.agent_id;
      st.day_index = static_cast<std::int32_t>(day);
      st.day_start = day * kSecondsPerDay - tz_offset_s;
      out.push_back(std::move(st));
    }
    out.back().points.push_back(p);
  }
  return out;
}

GridTrack resample(const SubTrajectory& st, const ResampleSpec& spec) {
  spec.validate();
  if (st.points.empty()) throw Error("empty input");
  GridTrack g;
  g.agent_id = st.agent_id;
  g.day_index = st.day_index;
  g.day_start = st.day_start;
  g.stride_s = spec.stride_s;

  const auto& pts = st.points;
  const std::int64_t first_rel = pts.front().t - st.day_start;
  const std::int64_t last_rel = pts.back().t - st.day_start;
  g.first_slot = floor_div(first_rel + spec.stride_s - 1, spec.stride_s);
  const std::int64_t last_slot = floor_div(last_rel, spec.stride_s);
  if (last_slot < g.first_slot) {
    // No grid time falls inside the sampled span; keep the lone slot absent.
    g.first_slot = floor_div(first_rel, spec.stride_s);
    g.pos.assign(1, pts.front().pos);
    g.present.assign(1, 0);
    return g;
  }

  const auto n = static_cast<std::size_t>(last_slot - g.first_slot + 1);
  g.pos.resize(n);
  g.present.assign(n, 0);
  std::size_t i = 0;  // pts[i].t <= current grid time < pts[i + 1].t
  for (std::size_t k = 0; k < n; ++k) {
    const std::int64_t t = st.day_start + (g.first_slot + static_cast<std::int64_t>(k)) * spec.stride_s;
    while (i + 1 < pts.size() && pts[i + 1].t <= t) ++i;
    if (pts[i].t == t) {
      g.pos[k] = pts[i].pos;
      g.present[k] = 1;
      continue;
    }
    // i + 1 exists because t <= last sample time and pts[i].t != t.
    const TimedPoint& a = pts[i];
    const TimedPoint& b = pts[i + 1];
    const std::int64_t gap = b.t - a.t;
    g.pos[k] = lerp(a.pos, b.pos, static_cast<double>(t - a.t) / static_cast<double>(gap));
    g.present[k] = gap <= spec.max_gap_s ? 1 : 0;
  }
  return g;
}

SubTrajectory to_subtrajectory(const GridTrack& track) {
  SubTrajectory st;
  st.agent_id = track.agent_id;
  st.day_index = track.day_index;
  st.day_start = track.day_start;
  st.points = track.present_points(true);
  return st;
}

}  // namespace polreeb
