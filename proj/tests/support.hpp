#pragma once

#include <cmath>
#include <random>

#include "meshforge/geoframe.hpp"
#include "meshforge/mesh.hpp"
#include "meshforge/rfm.hpp"
#include "meshforge/synth.hpp"

namespace testing {

using namespace meshforge;

/// Cubic model around (30N, 81W) with dominant linear terms and a denominator
/// close to one, so that it stays well conditioned over its validity box.
inline rfm::Model random_model(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  rfm::Model m;
  m.lat_off = 30.0 + 0.5 * n(rng);
  m.lon_off = -81.0 + 0.5 * n(rng);
  m.height_off = 50.0 * n(rng);
  m.lat_scale = 0.05;
  m.lon_scale = 0.06;
  m.height_scale = 500.0;
  m.samp_off = 5000.0;
  m.samp_scale = 5000.0;
  m.line_off = 4000.0;
  m.line_scale = 4000.0;
  for (int k = 0; k < 20; ++k) {
    const double s = k < 4 ? 0.05 : 0.01;
    m.num_samp[k] = s * n(rng);
    m.num_line[k] = s * n(rng);
    m.den_samp[k] = k == 0 ? 1.0 : 0.002 * n(rng);
    m.den_line[k] = k == 0 ? 1.0 : 0.002 * n(rng);
  }
  m.num_samp[1] += 1.0;
  m.num_line[2] -= 1.0;
  m.num_samp[3] += 0.1;
  m.num_line[3] += 0.1;
  return m;
}

inline GeoPoint random_point(const rfm::Model& m, std::mt19937_64& rng, double extent = 0.9) {
  std::uniform_real_distribution<double> u(-extent, extent);
  return m.denormalize({u(rng), u(rng), u(rng)});
}

inline double max_abs(const Eigen::MatrixXd& a) { return a.cwiseAbs().maxCoeff(); }

/// Flat DEM of given height and layout.
inline DemGrid flat_dem(int cols, int rows, double cell, double z, double x0 = 0.0, double y0 = 0.0) {
  return DemGrid(x0, y0, cell, cols, rows, z);
}

/// Small textured scene used by refinement and raycast tests.
inline synth::SceneSpec small_scene(int size, double off_nadir = 6.0) {
  synth::SceneSpec s;
  s.gsd = 0.5;
  s.image_width = s.image_height = size;
  s.extent = size * s.gsd + 32.0;
  for (double az : {0.0, 90.0, 180.0, 270.0}) s.views.push_back({off_nadir, az, synth::ModelKind::Affine});
  return s;
}

}  // namespace testing
