#include "polreeb/geo.hpp"

#include <algorithm>
#include <string>

#include "polreeb/error.hpp"

namespace polreeb {

GeoPoint GeoPoint::make(double lat_deg, double lon_deg) {
  GeoPoint p{lat_deg, lon_deg};
  if (!p.valid()) {
    throw Error("invalid coordinate (" + std::to_string(lat_deg) + ", " +
                std::to_string(lon_deg) + ")");
  }
  return p;
}

double euclidean_deg(const GeoPoint& p, const GeoPoint& q) noexcept {
  return std::hypot(p.lat_deg - q.lat_deg, p.lon_deg - q.lon_deg);
}

double haversine_m(const GeoPoint& p, const GeoPoint& q) noexcept {
  const double lat1 = deg_to_rad(p.lat_deg);
  const double lat2 = deg_to_rad(q.lat_deg);
  const double s_lat = std::sin((lat2 - lat1) / 2.0);
  const double s_lon = std::sin(deg_to_rad(q.lon_deg - p.lon_deg) / 2.0);
  const double h = s_lat * s_lat + std::cos(lat1) * std::cos(lat2) * s_lon * s_lon;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

double distance(Metric metric, const GeoPoint& p, const GeoPoint& q) noexcept {
  return metric == Metric::kHaversine ? haversine_m(p, q) : euclidean_deg(p, q);
}

double speed_mps(const TimedPoint& a, const TimedPoint& b) {
  if (b.t <= a.t) throw Error("non-increasing time");
  return haversine_m(a.pos, b.pos) / static_cast<double>(b.t - a.t);
}

double bearing_deg(const GeoPoint& p, const GeoPoint& q) {
  if (p == q) throw Error("undefined bearing");
  const double lat1 = deg_to_rad(p.lat_deg);
  const double lat2 = deg_to_rad(q.lat_deg);
  const double dlon = deg_to_rad(q.lon_deg - p.lon_deg);
  const double y = std::sin(dlon) * std::cos(lat2);
  const double x = std::cos(lat1) * std::sin(lat2) - std::sin(lat1) * std::cos(lat2) * std::cos(dlon);
  double b = rad_to_deg(std::atan2(y, x));
  b = std::fmod(b + 360.0, 360.0);
  return b >= 360.0 ? 0.0 : b;
}

GeoPoint offset_m(const GeoPoint& origin, double east_m, double north_m) noexcept {
  const double dlat = rad_to_deg(north_m / kEarthRadiusM);
  const double dlon = rad_to_deg(east_m / (kEarthRadiusM * std::cos(deg_to_rad(origin.lat_deg))));
  return {std::clamp(origin.lat_deg + dlat, -90.0, 90.0),
          std::clamp(origin.lon_deg + dlon, -180.0, 180.0)};
}

GeoPoint lerp(const GeoPoint& a, const GeoPoint& b, double f) noexcept {
  return {a.lat_deg + (b.lat_deg - a.lat_deg) * f, a.lon_deg + (b.lon_deg - a.lon_deg) * f};
}

}  // namespace polreeb
