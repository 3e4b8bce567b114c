#include "polreeb/spatial_index.hpp"

#include <algorithm>
#include <cmath>

#include "polreeb/error.hpp"

namespace polreeb {

void EpsilonConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error("epsilon must be > 0");
}

EpsilonGrid::EpsilonGrid(const EpsilonConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  double side = cfg_.epsilon;
  if (cfg_.metric == Metric::kHaversine) {
    // Chord length equivalent to an arc of epsilon meters.
    const double half_angle = std::min(cfg_.epsilon / (2.0 * kEarthRadiusM), std::numbers::pi / 2.0);
    side = 2.0 * kEarthRadiusM * std::sin(half_angle);
  }
  cell_side_ = side * (1.0 + 1e-9) + 1e-9;
}

EpsilonGrid::Cell EpsilonGrid::cell_of(const GeoPoint& p) const noexcept {
  double x, y, z;
  if (cfg_.metric == Metric::kHaversine) {
    const double lat = deg_to_rad(p.lat_deg);
    const double lon = deg_to_rad(p.lon_deg);
    x = kEarthRadiusM * std::cos(lat) * std::cos(lon);
    y = kEarthRadiusM * std::cos(lat) * std::sin(lon);
    z = kEarthRadiusM * std::sin(lat);
  } else {
    x = p.lat_deg;
    y = p.lon_deg;
    z = 0.0;
  }
  return {static_cast<std::int64_t>(std::floor(x / cell_side_)),
          static_cast<std::int64_t>(std::floor(y / cell_side_)),
          static_cast<std::int64_t>(std::floor(z / cell_side_))};
}

void EpsilonGrid::pairs_within(std::span<const GeoPoint> points,
                               std::vector<std::pair<std::uint32_t, std::uint32_t>>& out) {
  const auto n = static_cast<std::uint32_t>(points.size());
  const std::size_t first_out = out.size();
  if (n < kBruteForceBelow) {
    for (std::uint32_t i = 0; i < n; ++i) {
      for (std::uint32_t j = i + 1; j < n; ++j) {
        if (distance(cfg_.metric, points[i], points[j]) < cfg_.epsilon) out.emplace_back(i, j);
      }
    }
    return;
  }

  keyed_.clear();
  keyed_.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) keyed_.emplace_back(cell_of(points[i]), i);
  std::sort(keyed_.begin(), keyed_.end(), [](const auto& a, const auto& b) {
    if (a.first.x != b.first.x) return a.first.x < b.first.x;
    if (a.first.y != b.first.y) return a.first.y < b.first.y;
    if (a.first.z != b.first.z) return a.first.z < b.first.z;
    return a.second < b.second;
  });
  ranges_.clear();
  for (std::uint32_t b = 0; b < n;) {
    std::uint32_t e = b + 1;
    while (e < n && keyed_[e].first == keyed_[b].first) ++e;
    ranges_.emplace(keyed_[b].first, std::make_pair(b, e));
    b = e;
  }

  for (const auto& [cell, i] : keyed_) {
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          const auto it = ranges_.find(Cell{cell.x + dx, cell.y + dy, cell.z + dz});
          if (it == ranges_.end()) continue;
          for (std::uint32_t r = it->second.first; r < it->second.second; ++r) {
            const std::uint32_t j = keyed_[r].second;
            if (j <= i) continue;
            if (distance(cfg_.metric, points[i], points[j]) < cfg_.epsilon) out.emplace_back(i, j);
          }
        }
      }
    }
  }
  std::sort(out.begin() + static_cast<std::ptrdiff_t>(first_out), out.end());
}

}  // namespace polreeb
