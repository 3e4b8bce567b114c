#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "polreeb/geo.hpp"

namespace polreeb {

struct EpsilonConfig {
  double epsilon = 50.0;  // meters under haversine, degrees under euclidean_deg
  Metric metric = Metric::kHaversine;

  void validate() const;

  friend bool operator==(const EpsilonConfig&, const EpsilonConfig&) = default;
};

// Fixed-radius neighbour search on a uniform hash grid whose cell side equals
// the search radius, so every qualifying pair lies in the 3x3x3 block around a
// point. Points are embedded in 3-D (the sphere scaled to meters for
// haversine, the lat/lon plane for euclidean_deg) and every candidate is
// confirmed with the exact metric, so results match a pairwise scan exactly.
class EpsilonGrid {
 public:
  explicit EpsilonGrid(const EpsilonConfig& cfg);

  // Appends (i, j), i < j, for every pair with distance strictly below epsilon.
  // Output is sorted.
  void pairs_within(std::span<const GeoPoint> points,
                    std::vector<std::pair<std::uint32_t, std::uint32_t>>& out);

  // Below this many points a direct pairwise scan is used.
  static constexpr std::size_t kBruteForceBelow = 32;

 private:
  struct Cell {
    std::int64_t x, y, z;
    friend bool operator==(const Cell&, const Cell&) = default;
  };
  struct CellHash {
    std::size_t operator()(const Cell& c) const noexcept {
      std::uint64_t h = static_cast<std::uint64_t>(c.x) * 0x9E3779B97F4A7C15ULL;
      h ^= static_cast<std::uint64_t>(c.y) * 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
      h ^= static_cast<std::uint64_t>(c.z) * 0x165667B19E3779F9ULL + (h << 6) + (h >> 2);
      return static_cast<std::size_t>(h);
    }
  };

  Cell cell_of(const GeoPoint& p) const noexcept;

  EpsilonConfig cfg_;
  double cell_side_;
  std::vector<std::pair<Cell, std::uint32_t>> keyed_;
  std::unordered_map<Cell, std::pair<std::uint32_t, std::uint32_t>, CellHash> ranges_;
};

}  // namespace polreeb
