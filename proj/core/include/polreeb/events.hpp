#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "polreeb/spatial_index.hpp"
#include "polreeb/trajectory.hpp"

namespace polreeb {

// Index of a track within the span handed to the event machinery.
using TrackId = std::uint32_t;

// Declaration order is the ordering applied to simultaneous events.
enum class EventKind : std::uint8_t { kAppear, kConnect, kDisconnect, kDisappear };

std::string_view to_string(EventKind kind) noexcept;

struct Event {
  EventKind kind = EventKind::kAppear;
  std::int64_t time = 0;               // grid time (seconds after local midnight)
  std::vector<TrackId> participants;   // sorted; one id, or a pair for (dis)connect

  friend bool operator==(const Event&, const Event&) = default;
};

struct SnapshotGraph {
  std::int64_t time = 0;
  std::vector<TrackId> active;                       // sorted
  std::vector<std::pair<TrackId, TrackId>> edges;    // (lo, hi), sorted
};

// A maximal run of grid times over which `members` is exactly one connected
// component of the snapshot graph. Interval bounds are inclusive grid times.
struct Bundle {
  std::vector<TrackId> members;  // sorted
  std::int64_t t_start = 0;
  std::int64_t t_end = 0;

  friend bool operator==(const Bundle&, const Bundle&) = default;
};

struct Timeline {
  std::vector<Bundle> bundles;  // ordered by (t_start, smallest member)
  std::vector<Event> events;    // ordered by (time, kind, participants)
};

// Connect/disconnect transitions between two tracks on the same grid. A pair is
// connected at a slot when both are present and strictly closer than epsilon.
std::vector<Event> detect_pair_events(const GridTrack& a, const GridTrack& b,
                                      const EpsilonConfig& cfg, TrackId id_a = 0,
                                      TrackId id_b = 1);

SnapshotGraph snapshot_graph(std::int64_t time,
                             std::span<const std::pair<TrackId, GeoPoint>> positions,
                             const EpsilonConfig& cfg);

// Components sorted internally and ordered by smallest member.
std::vector<std::vector<TrackId>> connected_components(const SnapshotGraph& g);

// Sweeps the shared grid once, maintaining the epsilon-connectivity graph and
// its components, and cuts bundles wherever a component's member set changes.
//
// Event conventions (times are grid times of the first slot in the new state):
//  - appear / disappear: an id becomes present / is no longer present;
//  - connect: a new component absorbs k >= 2 parts, where a part is either a
//    group carried over from one previous bundle or a freshly appeared id, and
//    at least one part was present before; k - 1 events are emitted;
//  - disconnect: the mirror image for a previous bundle breaking into parts
//    (vanished ids count as parts, as long as some member remains).
// Each (dis)connect names the smallest ids of the first part and the joining
// (leaving) part.
Timeline bundle_timeline(std::span<const GridTrack> tracks, const EpsilonConfig& cfg);

// One JSON object per line: {"kind":..., "t":..., "participants":[...]}.
void write_events_jsonl(std::ostream& os, std::span<const Event> events);

}  // namespace polreeb
