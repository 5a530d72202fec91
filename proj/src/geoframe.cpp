#include "meshforge/geoframe.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "meshforge/error.hpp"

namespace meshforge::geo {
namespace {

constexpr double kA = 6378137.0;
constexpr double kF = 1.0 / 298.257223563;
constexpr double kDeg = std::numbers::pi / 180.0;

struct Series {
  double e, e2, rect_radius;
  std::array<double, 6> alpha, beta;
};

const Series& series() {
  static const Series s = [] {
    Series out{};
    const double n = kF / (2.0 - kF);
    const double n2 = n * n, n3 = n2 * n, n4 = n3 * n, n5 = n4 * n, n6 = n5 * n;
    out.e2 = kF * (2.0 - kF);
    out.e = std::sqrt(out.e2);
    out.rect_radius = kA / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
    out.alpha = {
        n / 2 - 2 * n2 / 3 + 5 * n3 / 16 + 41 * n4 / 180 - 127 * n5 / 288 + 7891 * n6 / 37800,
        13 * n2 / 48 - 3 * n3 / 5 + 557 * n4 / 1440 + 281 * n5 / 630 - 1983433 * n6 / 1935360,
        61 * n3 / 240 - 103 * n4 / 140 + 15061 * n5 / 26880 + 167603 * n6 / 181440,
        49561 * n4 / 161280 - 179 * n5 / 168 + 6601661 * n6 / 7257600,
        34729 * n5 / 80640 - 3418889 * n6 / 1995840,
        212378941 * n6 / 319334400};
    out.beta = {
        n / 2 - 2 * n2 / 3 + 37 * n3 / 96 - n4 / 360 - 81 * n5 / 512 + 96199 * n6 / 604800,
        n2 / 48 + n3 / 15 - 437 * n4 / 1440 + 46 * n5 / 105 - 1118711 * n6 / 3870720,
        17 * n3 / 480 - 37 * n4 / 840 - 209 * n5 / 4480 + 5569 * n6 / 90720,
        4397 * n4 / 161280 - 11 * n5 / 504 - 830251 * n6 / 7257600,
        4583 * n5 / 161280 - 108847 * n6 / 3991680,
        20648693 * n6 / 638668800};
    return out;
  }();
  return s;
}

// Conformal latitude tangent from geographic latitude tangent.
double taupf(double tau, double e) {
  const double tau1 = std::hypot(1.0, tau);
  const double sig = std::sinh(e * std::atanh(e * tau / tau1));
  return std::hypot(1.0, sig) * tau - sig * tau1;
}

double tauf(double taup, double e, double e2) {
  const double e2m = 1.0 - e2;
  double tau = taup / e2m;
  for (int i = 0; i < 10; ++i) {
    const double taupa = taupf(tau, e);
    const double dtau = (taup - taupa) * (1.0 + e2m * tau * tau) /
                        (e2m * std::hypot(1.0, tau) * std::hypot(1.0, taupa));
    tau += dtau;
    if (std::abs(dtau) < 1e-15 * std::max(1.0, std::abs(tau))) break;
  }
  return tau;
}

}  // namespace

TransverseMercator::TransverseMercator(double central_meridian_deg, double k0,
                                       double false_easting, double false_northing)
    : lon0_(central_meridian_deg), k0_(k0), fe_(false_easting), fn_(false_northing) {}

GridCoord TransverseMercator::forward(double lat_deg, double lon_deg) const {
  if (!std::isfinite(lat_deg) || !std::isfinite(lon_deg) || std::abs(lat_deg) > 84.0) {
    std::ostringstream msg;
    msg << "latitude " << lat_deg << " outside the transverse Mercator domain";
    throw Error(ErrorKind::UtmConversionFailure, msg.str());
  }
  const Series& s = series();
  const double lam = (lon_deg - lon0_) * kDeg;
  const double tau = std::tan(lat_deg * kDeg);
  const double taup = taupf(tau, s.e);
  const double xip = std::atan2(taup, std::cos(lam));
  const double etap = std::asinh(std::sin(lam) / std::hypot(taup, std::cos(lam)));
  double xi = xip, eta = etap;
  for (int j = 1; j <= 6; ++j) {
    xi += s.alpha[j - 1] * std::sin(2 * j * xip) * std::cosh(2 * j * etap);
    eta += s.alpha[j - 1] * std::cos(2 * j * xip) * std::sinh(2 * j * etap);
  }
  return {fe_ + k0_ * s.rect_radius * eta, fn_ + k0_ * s.rect_radius * xi};
}

Eigen::Vector2d TransverseMercator::reverse(const GridCoord& g) const {
  const Series& s = series();
  const double xi = (g.northing - fn_) / (k0_ * s.rect_radius);
  const double eta = (g.easting - fe_) / (k0_ * s.rect_radius);
  double xip = xi, etap = eta;
  for (int j = 1; j <= 6; ++j) {
    xip -= s.beta[j - 1] * std::sin(2 * j * xi) * std::cosh(2 * j * eta);
    etap -= s.beta[j - 1] * std::cos(2 * j * xi) * std::sinh(2 * j * eta);
  }
  const double taup = std::sin(xip) / std::hypot(std::sinh(etap), std::cos(xip));
  const double lam = std::atan2(std::sinh(etap), std::cos(xip));
  const double tau = tauf(taup, s.e, s.e2);
  return {std::atan(tau) / kDeg, lon0_ + lam / kDeg};
}

int utm_zone(double lon_deg) {
  const int zone = static_cast<int>(std::floor((lon_deg + 180.0) / 6.0)) + 1;
  return std::clamp(zone, 1, 60);
}

double utm_central_meridian(int zone) { return -183.0 + 6.0 * zone; }

LocalPoint LocalFrame::to_local(const GeoPoint& pt) const {
  return {(pt.lon - anchor.lon) / deg_lon_per_m, (pt.lat - anchor.lat) / deg_lat_per_m,
          pt.height - anchor.height};
}

GeoPoint LocalFrame::from_local(const LocalPoint& pt) const {
  return {anchor.lat + pt.y() * deg_lat_per_m, anchor.lon + pt.x() * deg_lon_per_m,
          anchor.height + pt.z()};
}

LocalFrame build_frame(const GeoPoint& anchor) {
  LocalFrame f;
  f.anchor = anchor;
  f.central_meridian = anchor.lon;
  const TransverseMercator tm(f.central_meridian);
  f.anchor_grid = tm.forward(anchor.lat, anchor.lon);
  const Eigen::Vector2d next =
      tm.reverse({f.anchor_grid.easting + 1.0, f.anchor_grid.northing + 1.0});
  f.deg_lat_per_m = next[0] - anchor.lat;
  f.deg_lon_per_m = next[1] - anchor.lon;
  if (!std::isfinite(f.deg_lat_per_m) || !std::isfinite(f.deg_lon_per_m) ||
      f.deg_lat_per_m == 0.0 || f.deg_lon_per_m == 0.0)
    throw Error(ErrorKind::UtmConversionFailure, "degenerate local frame scale factors");
  return f;
}

rfm::Jacobian chained_jacobian(const rfm::Model& model, const LocalFrame& frame,
                               const LocalPoint& pt) {
  const rfm::Jacobian geo = rfm::projection_jacobian(model, frame.from_local(pt));
  rfm::Jacobian out;
  out.col(0) = geo.col(1) * frame.deg_lon_per_m;
  out.col(1) = geo.col(0) * frame.deg_lat_per_m;
  out.col(2) = geo.col(2);
  return out;
}

std::vector<FrameCheckRow> validate_frame(const LocalFrame& frame, const std::vector<double>& scales,
                                          double terrain_height) {
  const TransverseMercator tm(frame.central_meridian);
  const GridCoord p0 = frame.anchor_grid;
  auto local_of = [&](double de, double dn) {
    const Eigen::Vector2d ll = tm.reverse({p0.easting + de, p0.northing + dn});
    return frame.to_local({ll[0], ll[1], terrain_height});
  };
  const LocalPoint origin = local_of(0.0, 0.0);
  std::vector<FrameCheckRow> rows;
  rows.reserve(scales.size());
  for (double s : scales) {
    if (!(s > 0.0)) throw Error(ErrorKind::InvalidArgument, "frame check scales must be positive");
    const Eigen::Vector3d x = local_of(s, 0.0) - origin;
    const Eigen::Vector3d y = local_of(0.0, s) - origin;
    const double angle = std::atan2(x.cross(y).norm(), x.dot(y)) / kDeg;
    rows.push_back({s, x.norm(), y.norm(), angle});
  }
  return rows;
}

}  // namespace meshforge::geo
