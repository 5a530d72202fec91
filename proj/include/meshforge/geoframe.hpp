#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <vector>

#include "meshforge/rfm.hpp"

namespace meshforge {

/// Metric point in the quasi-Cartesian local frame: x east, y north, z up.
using LocalPoint = Eigen::Vector3d;

namespace geo {

struct GridCoord {
  double easting = 0.0;
  double northing = 0.0;
};

/// WGS84 transverse Mercator with UTM scale and false easting, evaluated with
/// the 6th-order Krüger series (nanometer-level accuracy inside a zone).
class TransverseMercator {
 public:
  explicit TransverseMercator(double central_meridian_deg, double k0 = 0.9996,
                              double false_easting = 500000.0, double false_northing = 0.0);

  /// Throws UtmConversionFailure for non-finite input or |lat| > 84°.
  GridCoord forward(double lat_deg, double lon_deg) const;
  /// Returns {lat, lon} in degrees.
  Eigen::Vector2d reverse(const GridCoord& grid) const;

  double central_meridian() const { return lon0_; }

 private:
  double lon0_, k0_, fe_, fn_;
};

/// Standard UTM zone number for a longitude.
int utm_zone(double lon_deg);
double utm_central_meridian(int zone);

/// Geographic ↔ local metric mapping by per-axis degree scaling around an
/// anchor. The scale factors are calibrated by stepping one meter east and
/// north in a transverse Mercator grid centered on the anchor.
struct LocalFrame {
  GeoPoint anchor;
  double central_meridian = 0.0;
  GridCoord anchor_grid;
  double deg_lat_per_m = 0.0;  // B_{c+1} - B_c
  double deg_lon_per_m = 0.0;  // L_{c+1} - L_c

  LocalPoint to_local(const GeoPoint& pt) const;
  GeoPoint from_local(const LocalPoint& pt) const;

  double m_per_deg_lat() const { return 1.0 / deg_lat_per_m; }
  double m_per_deg_lon() const { return 1.0 / deg_lon_per_m; }
};

LocalFrame build_frame(const GeoPoint& anchor);

/// Image-space Jacobian w.r.t. local meters (columns x, y, z).
rfm::Jacobian chained_jacobian(const rfm::Model& model, const LocalFrame& frame,
                               const LocalPoint& pt);

struct FrameCheckRow {
  double scale = 0.0;
  double length_x = 0.0;
  double length_y = 0.0;
  double angle_deg = 0.0;
};

/// Maps orthogonal grid vectors of length `scale`, placed on a horizontal
/// plane at `terrain_height` through the anchor, into the local frame and
/// reports their lengths and the angle between them.
std::vector<FrameCheckRow> validate_frame(const LocalFrame& frame, const std::vector<double>& scales,
                                          double terrain_height);

}  // namespace geo
}  // namespace meshforge
