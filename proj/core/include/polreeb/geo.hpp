#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <numbers>

namespace polreeb {

// Mean Earth radius. All metric thresholds in this library are expressed
// against this constant.
inline constexpr double kEarthRadiusM = 6'371'000.0;

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

// A WGS84-style latitude/longitude pair in degrees. Construct through make()
// (validating) or the aggregate form when the values are already known good.
struct GeoPoint {
  double lat_deg = 0.0;
  double lon_deg = 0.0;

  // Throws polreeb::Error when out of range or not finite.
  static GeoPoint make(double lat_deg, double lon_deg);

  bool valid() const noexcept {
    return std::isfinite(lat_deg) && std::isfinite(lon_deg) && lat_deg >= -90.0 &&
           lat_deg <= 90.0 && lon_deg >= -180.0 && lon_deg <= 180.0;
  }

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

// Integer epoch seconds (UTC) plus a position.
struct TimedPoint {
  std::int64_t t = 0;
  GeoPoint pos;

  friend bool operator==(const TimedPoint&, const TimedPoint&) = default;
};

enum class Metric : std::uint8_t { kHaversine, kEuclideanDeg };

// Planar distance in raw degree space: sqrt(dlat^2 + dlon^2).
double euclidean_deg(const GeoPoint& p, const GeoPoint& q) noexcept;

// Great-circle distance in meters on a sphere of radius kEarthRadiusM.
double haversine_m(const GeoPoint& p, const GeoPoint& q) noexcept;

// Dispatches on the metric; units are meters or degrees accordingly.
double distance(Metric metric, const GeoPoint& p, const GeoPoint& q) noexcept;

// Ground speed between two fixes. Throws when b.t <= a.t ("non-increasing time").
double speed_mps(const TimedPoint& a, const TimedPoint& b);

// Initial great-circle bearing from p to q in [0, 360), 0 = north, 90 = east.
// Throws when p == q ("undefined bearing").
double bearing_deg(const GeoPoint& p, const GeoPoint& q);

// Point displaced by (east_m, north_m) in the local tangent plane at `origin`.
GeoPoint offset_m(const GeoPoint& origin, double east_m, double north_m) noexcept;

// Linear interpolation in coordinate space; f in [0, 1].
GeoPoint lerp(const GeoPoint& a, const GeoPoint& b, double f) noexcept;

}  // namespace polreeb
