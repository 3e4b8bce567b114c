#include "polreeb/terg.hpp"

#include "polreeb/error.hpp"

namespace polreeb {

ReebGraph assemble_reeb_graph(std::span<const GridTrack> tracks, const EpsilonConfig& cfg,
                              GraphKind kind, const TergOptions& opt) {
  if (tracks.empty()) throw Error("empty input");
  if (opt.rep_stride_s < 1) throw Error("rep_stride_s must be >= 1");
  const Timeline timeline = bundle_timeline(tracks, cfg);

  ReebGraph g;
  g.kind = kind;
  g.epsilon = cfg;
  g.stride_s = tracks.front().stride_s;
  g.rep_stride_s = opt.rep_stride_s;
  g.tracks.reserve(tracks.size());
  for (const GridTrack& t : tracks) g.tracks.push_back({t.agent_id, t.day_index, t.day_start, -1});

  g.nodes.reserve(timeline.bundles.size());
  for (const Bundle& b : timeline.bundles) {
    ReebNode node;
    node.id = static_cast<std::uint32_t>(g.nodes.size());
    node.members = b.members;
    node.t_start = b.t_start;
    node.t_end = b.t_end;
    node.support = kind == GraphKind::kAgentTerg ? 1U : static_cast<std::uint32_t>(b.members.size());
    for (std::int64_t t : representative_times(b.t_start, b.t_end, opt.rep_stride_s)) {
      // Representative times off the tracking grid snap down to it.
      const std::int64_t slot = floor_div(t, g.stride_s);
      double lat = 0.0, lon = 0.0;
      for (TrackId m : b.members) {
        const GeoPoint& p = tracks[m].at(slot);
        lat += p.lat_deg;
        lon += p.lon_deg;
      }
      const auto k = static_cast<double>(b.members.size());
      node.centroid_path.push_back({t, {lat / k, lon / k}});
    }
    g.nodes.push_back(std::move(node));
  }
  rebuild_edges(g);
  return g;
}

ReebGraph build_terg(std::span<const GridTrack> tracks, const EpsilonConfig& cfg,
                     const TergOptions& opt) {
  if (tracks.empty()) throw Error("empty input");
  for (const GridTrack& t : tracks) {
    if (t.agent_id != tracks.front().agent_id) throw Error("tracks from more than one agent");
  }
  return assemble_reeb_graph(tracks, cfg, GraphKind::kAgentTerg, opt);
}

}  // namespace polreeb
