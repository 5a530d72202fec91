#include "meshforge/rfm.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

#include "meshforge/error.hpp"

namespace meshforge::rfm {
namespace {

std::atomic<std::size_t> g_expanded_hits{0};

double dot(const Coefficients& c, const Basis& p) {
  double s = 0.0;
  for (int k = 0; k < 20; ++k) s += c[k] * p[k];
  return s;
}

Eigen::RowVector3d dot(const Coefficients& c, const BasisJacobian& dp) {
  Eigen::RowVector3d s = Eigen::RowVector3d::Zero();
  for (int k = 0; k < 20; ++k) s += c[k] * dp.row(k);
  return s;
}

double checked_ratio(double num, double den, double guard) {
  if (std::abs(den) < guard) {
    std::ostringstream msg;
    msg << "rational denominator " << den << " below guard " << guard;
    throw Error(ErrorKind::DenominatorNearZero, msg.str());
  }
  return num / den;
}

void check_validity(const Model& m, const GeoPoint& pt) {
  switch (m.validity(pt)) {
    case Validity::Inside:
      return;
    case Validity::Expanded:
      g_expanded_hits.fetch_add(1, std::memory_order_relaxed);
      return;
    case Validity::Outside: {
      std::ostringstream msg;
      msg << "point (" << pt.lat << ", " << pt.lon << ", " << pt.height
          << ") outside the model's expanded validity box";
      throw Error(ErrorKind::OutsideValidity, msg.str());
    }
  }
}

}  // namespace

Basis poly_basis(const Eigen::Vector3d& p) {
  const double b = p[0], l = p[1], h = p[2];
  Basis out;
  out << 1.0, l, b, h, l * b, l * h, b * h, l * l, b * b, h * h,  //
      b * l * h, l * l * l, l * b * b, l * h * h, l * l * b, b * b * b, b * h * h, l * l * h,
      b * b * h, h * h * h;
  return out;
}

BasisJacobian basis_jacobian(const Eigen::Vector3d& p) {
  const double b = p[0], l = p[1], h = p[2];
  BasisJacobian j;
  //        d/dB         d/dL         d/dH
  j.row(0) << 0.0, 0.0, 0.0;
  j.row(1) << 0.0, 1.0, 0.0;
  j.row(2) << 1.0, 0.0, 0.0;
  j.row(3) << 0.0, 0.0, 1.0;
  j.row(4) << l, b, 0.0;
  j.row(5) << 0.0, h, l;
  j.row(6) << h, 0.0, b;
  j.row(7) << 0.0, 2 * l, 0.0;
  j.row(8) << 2 * b, 0.0, 0.0;
  j.row(9) << 0.0, 0.0, 2 * h;
  j.row(10) << l * h, b * h, b * l;
  j.row(11) << 0.0, 3 * l * l, 0.0;
  j.row(12) << 2 * l * b, b * b, 0.0;
  j.row(13) << 0.0, h * h, 2 * l * h;
  j.row(14) << l * l, 2 * l * b, 0.0;
  j.row(15) << 3 * b * b, 0.0, 0.0;
  j.row(16) << h * h, 0.0, 2 * b * h;
  j.row(17) << 0.0, 2 * l * h, l * l;
  j.row(18) << 2 * b * h, 0.0, b * b;
  j.row(19) << 0.0, 0.0, 3 * h * h;
  return j;
}

void Model::validate() const {
  for (double s : {lat_scale, lon_scale, height_scale, samp_scale, line_scale}) {
    if (!(s > 0.0) || !std::isfinite(s))
      throw Error(ErrorKind::InvalidModel, "normalization scales must be strictly positive");
  }
  constexpr int kSteps = 9;
  for (int i = 0; i < kSteps; ++i)
    for (int j = 0; j < kSteps; ++j)
      for (int k = 0; k < kSteps; ++k) {
        const Eigen::Vector3d p(-1.0 + 2.0 * i / (kSteps - 1), -1.0 + 2.0 * j / (kSteps - 1),
                                -1.0 + 2.0 * k / (kSteps - 1));
        const Basis basis = poly_basis(p);
        for (const Coefficients* den : {&den_samp, &den_line}) {
          const double d = dot(*den, basis);
          if (!(std::abs(d) >= denominator_guard))
            throw Error(ErrorKind::InvalidModel, "denominator vanishes inside the validity box");
        }
      }
}

Eigen::Vector3d Model::normalize(const GeoPoint& p) const {
  return {(p.lat - lat_off) / lat_scale, (p.lon - lon_off) / lon_scale,
          (p.height - height_off) / height_scale};
}

GeoPoint Model::denormalize(const Eigen::Vector3d& p) const {
  return {p[0] * lat_scale + lat_off, p[1] * lon_scale + lon_off,
          p[2] * height_scale + height_off};
}

Validity Model::validity(const GeoPoint& pt) const {
  const double m = normalize(pt).cwiseAbs().maxCoeff();
  if (!std::isfinite(m) || m > validity_expansion) return Validity::Outside;
  if (m > 1.0) return Validity::Expanded;
  return Validity::Inside;
}

Model Model::with_image_scale(double factor) const {
  Model out = *this;
  out.samp_scale = samp_scale * factor;
  out.line_scale = line_scale * factor;
  out.samp_off = samp_off * factor - 0.5 * (1.0 - factor);
  out.line_off = line_off * factor - 0.5 * (1.0 - factor);
  out.shift_samp = shift_samp * factor;
  out.shift_line = shift_line * factor;
  return out;
}

PixelCoord project_unchecked(const Model& m, const GeoPoint& pt) {
  const Basis p = poly_basis(m.normalize(pt));
  const double rs = checked_ratio(dot(m.num_samp, p), dot(m.den_samp, p), m.denominator_guard);
  const double rl = checked_ratio(dot(m.num_line, p), dot(m.den_line, p), m.denominator_guard);
  return {m.samp_scale * rs + m.samp_off + m.shift_samp,
          m.line_scale * rl + m.line_off + m.shift_line};
}

PixelCoord project(const Model& m, const GeoPoint& pt) {
  check_validity(m, pt);
  return project_unchecked(m, pt);
}

Jacobian projection_jacobian(const Model& m, const GeoPoint& pt) {
  check_validity(m, pt);
  return projection_jacobian_unchecked(m, pt);
}

Jacobian projection_jacobian_unchecked(const Model& m, const GeoPoint& pt) {
  const Eigen::Vector3d pn = m.normalize(pt);
  const Basis p = poly_basis(pn);
  const BasisJacobian dp = basis_jacobian(pn);
  const Eigen::RowVector3d chain(1.0 / m.lat_scale, 1.0 / m.lon_scale, 1.0 / m.height_scale);

  auto row = [&](const Coefficients& num, const Coefficients& den, double scale) {
    const double n = dot(num, p);
    const double d = dot(den, p);
    checked_ratio(n, d, m.denominator_guard);
    const Eigen::RowVector3d dn = dot(num, dp);
    const Eigen::RowVector3d dd = dot(den, dp);
    return Eigen::RowVector3d(scale * (dn * d - n * dd) / (d * d)).cwiseProduct(chain).eval();
  };

  Jacobian j;
  j.row(0) = row(m.num_samp, m.den_samp, m.samp_scale);
  j.row(1) = row(m.num_line, m.den_line, m.line_scale);
  return j;
}

std::size_t expanded_validity_hits() { return g_expanded_hits.load(); }

}  // namespace meshforge::rfm
