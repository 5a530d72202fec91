#pragma once

#include <Eigen/Core>
#include <array>
#include <cstddef>

namespace meshforge {

/// Geographic coordinate: latitude and longitude in degrees, ellipsoidal
/// height in meters.
struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
  double height = 0.0;
};

/// Image coordinate in pixels; integer values are pixel centers.
struct PixelCoord {
  double x = 0.0;  // sample
  double y = 0.0;  // line
};

namespace rfm {

using Coefficients = std::array<double, 20>;
using Basis = Eigen::Matrix<double, 20, 1>;
using BasisJacobian = Eigen::Matrix<double, 20, 3>;
/// Rows (sample, line); columns (lat, lon, height).
using Jacobian = Eigen::Matrix<double, 2, 3>;

/// Cubic monomials of a normalized point (B_n, L_n, H_n) in RPC00B order:
/// 1, L, B, H, LB, LH, BH, L², B², H², BLH, L³, LB², LH², L²B, B³, BH², L²H, B²H, H³.
Basis poly_basis(const Eigen::Vector3d& p_norm);

/// Partial derivatives of poly_basis; column k is d/d(p_norm[k]).
BasisJacobian basis_jacobian(const Eigen::Vector3d& p_norm);

enum class Validity { Inside, Expanded, Outside };

/// Rational function sensor model (RPC00B coefficient layout) with an
/// additive bias shift in pixels.
struct Model {
  Coefficients num_samp{};
  Coefficients den_samp{};
  Coefficients num_line{};
  Coefficients den_line{};

  double lat_off = 0.0, lat_scale = 1.0;
  double lon_off = 0.0, lon_scale = 1.0;
  double height_off = 0.0, height_scale = 1.0;
  double samp_off = 0.0, samp_scale = 1.0;
  double line_off = 0.0, line_scale = 1.0;

  double shift_samp = 0.0;
  double shift_line = 0.0;

  /// Normalized points may stray this far outside [-1,1]³ before projection fails.
  double validity_expansion = 1.2;
  double denominator_guard = 1e-10;

  /// Throws InvalidModel if a scale is non-positive or a denominator
  /// vanishes on a lattice sampled over [-1,1]³.
  void validate() const;

  Eigen::Vector3d normalize(const GeoPoint& p) const;
  GeoPoint denormalize(const Eigen::Vector3d& p_norm) const;
  Validity validity(const GeoPoint& p) const;

  /// Same sensor seen through an image resampled by `factor` (0.5 = one
  /// pyramid level down, with 2×2 block averaging and pixel-center convention).
  Model with_image_scale(double factor) const;
};

/// Object-to-image projection including the bias shift. Throws
/// OutsideValidity beyond the expanded box and DenominatorNearZero.
PixelCoord project(const Model& model, const GeoPoint& pt);

/// Analytic 2×3 Jacobian in px/deg, px/deg, px/m.
Jacobian projection_jacobian(const Model& model, const GeoPoint& pt);

/// Variants without the validity-box check (denominators are still guarded).
PixelCoord project_unchecked(const Model& model, const GeoPoint& pt);
Jacobian projection_jacobian_unchecked(const Model& model, const GeoPoint& pt);

/// Number of projections so far that landed in the tolerated band between
/// the nominal and the expanded validity box.
std::size_t expanded_validity_hits();

}  // namespace rfm
}  // namespace meshforge
