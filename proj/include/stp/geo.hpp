#ifndef STP_GEO_HPP
#define STP_GEO_HPP

#include <cmath>

namespace stp {

inline constexpr double kEarthRadiusM = 6371000.0;

inline double deg2rad(double deg) { return deg * M_PI / 180.0; }

// Great-circle distance in meters between two (lat, lon) points in degrees.
inline double haversine_m(double lat1, double lon1, double lat2, double lon2) {
  double phi1 = deg2rad(lat1);
  double phi2 = deg2rad(lat2);
  double dphi = deg2rad(lat2 - lat1);
  double dlambda = deg2rad(lon2 - lon1);
  double s1 = std::sin(0.5 * dphi);
  double s2 = std::sin(0.5 * dlambda);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  if (h > 1.0) h = 1.0;
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

// Approximate degree offsets for a displacement in meters near a latitude;
// good to well under a meter at the sub-kilometer scales used here.
inline double meters_to_dlat(double north_m) { return north_m / 111194.9; }

inline double meters_to_dlon(double east_m, double at_lat_deg) {
  double c = std::cos(deg2rad(at_lat_deg));
  if (std::abs(c) < 1e-9) c = 1e-9;
  return east_m / (111194.9 * c);
}

}  // namespace stp

#endif  // STP_GEO_HPP
