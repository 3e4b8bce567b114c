#pragma once

#include <span>
#include <string>
#include <vector>

#include "polreeb/reeb_graph.hpp"
#include "polreeb/trajectory.hpp"

namespace polreeb {

// Stop (stay-point) detection thresholds.
struct StopParams {
  double v_stop_mps = 0.5;
  double min_stop_s = 300.0;
  double stop_radius_m = 30.0;

  void validate() const;
};

// Mode classification on the 95th-percentile moving speed.
struct ModeThresholds {
  double walk_max_mps = 2.5;
  double bike_max_mps = 8.0;
};

struct Stop {
  std::int64_t t_start = 0;
  std::int64_t t_end = 0;
  GeoPoint centroid;

  std::int64_t duration_s() const noexcept { return t_end - t_start; }
};

// Maximal runs where consecutive speeds stay below v_stop and every fix stays
// within stop_radius of the run's running centroid, kept when they last at
// least min_stop_s.
std::vector<Stop> detect_stops(std::span<const TimedPoint> points, const StopParams& p);
std::vector<Stop> detect_stops(const SubTrajectory& st, const StopParams& p);

// One mode per segment with any moving sample (speed >= v_moving).
ModeSet estimate_mode(std::span<const std::vector<double>> segment_speeds, double v_moving_mps,
                      const ModeThresholds& t = {});
ModeSet estimate_mode(std::span<const double> speeds, double v_moving_mps,
                      const ModeThresholds& t = {});

// Fills NodeFeatures for every node from the member tracks restricted to the
// node interval. `tracks` is indexed by TrackId and must be the set the graph
// was built from.
ReebGraph annotate_features(ReebGraph g, std::span<const GridTrack> tracks, const StopParams& p,
                            const ModeThresholds& mt = {});

// Features of a single node computed from its representative path alone; used
// where member tracks are not retained.
NodeFeatures features_from_path(const ReebNode& node, const StopParams& p,
                                const ModeThresholds& mt = {});

// Largest anchor-to-anchor haversine distance. The usual literature name for
// this feature is "radius of gyration"; the quantity itself is the node-set
// diameter. Throws "features required" on unannotated graphs.
double graph_diameter_m(const ReebGraph& g);

// Hook for semantic place labels (home, work, ...). The default labeler knows
// no places.
class PoiLabeler {
 public:
  virtual ~PoiLabeler() = default;
  virtual std::vector<std::string> labels(const ReebNode& node) const = 0;
};

class NullPoiLabeler final : public PoiLabeler {
 public:
  std::vector<std::string> labels(const ReebNode&) const override { return {}; }
};

}  // namespace polreeb
