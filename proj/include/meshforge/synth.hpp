#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <vector>

#include "meshforge/geoframe.hpp"
#include "meshforge/imaging.hpp"
#include "meshforge/mesh.hpp"
#include "meshforge/rfm.hpp"

namespace meshforge::synth {

enum class TerrainKind { Flat, Ramp, Boxes, Fractal };
enum class ModelKind { Affine, CubicPerspectiveFit };

struct Box {
  double center_x = 0.0;
  double center_y = 0.0;
  double half_x = 5.0;
  double half_y = 5.0;
  double height = 5.0;
};

struct TerrainSpec {
  TerrainKind kind = TerrainKind::Flat;
  double base_height = 0.0;
  double slope_x = 0.0;  // ramp, m/m
  double slope_y = 0.0;
  std::vector<Box> boxes;  // added on top of any kind when non-empty
  double hill_amplitude = 0.0;  // fractal: peak amplitude of the smooth hills
  double hill_wavelength = 60.0;
  int hill_octaves = 3;
};

/// Sum of seeded 3D sinusoids between min_wavelength and
/// min_wavelength * 2^(octaves-1), all octaves with equal amplitude.
struct TextureSpec {
  double mean = 0.5;
  double contrast = 0.35;
  double min_wavelength_px = 4.0;
  int octaves = 5;
  int components_per_octave = 4;
};

struct ViewSpec {
  double off_nadir_deg = 0.0;
  double azimuth_deg = 0.0;  // horizontal direction from the scene toward the sensor, clockwise from north
  ModelKind kind = ModelKind::Affine;
};

struct SceneSpec {
  GeoPoint anchor{30.0, -81.0, 0.0};
  double extent = 160.0;  // side of the square truth DEM, m
  double gsd = 0.5;
  int image_width = 256;
  int image_height = 256;
  TerrainSpec terrain;
  TextureSpec texture;
  std::vector<ViewSpec> views;
  /// Half height range of the sensor models' validity box around the base height.
  double model_height_scale = 1100.0;
  /// Distance from the scene center to a perspective sensor.
  double sensor_range = 600000.0;

  /// Throws Config on invalid values.
  void validate() const;
};

double terrain_height(const TerrainSpec& terrain, std::uint64_t seed, double x, double y);

/// Seeded procedural intensity field in [mean - contrast, mean + contrast].
class Texture {
 public:
  Texture(const TextureSpec& spec, double gsd, std::uint64_t seed);
  double operator()(const LocalPoint& p) const;

 private:
  struct Wave {
    Eigen::Vector3d k;
    double phase;
    double amplitude;
  };
  double mean_ = 0.0;
  std::vector<Wave> waves_;
};

/// Line-scanning perspective sensor: each image line is a scan plane with
/// normal `axes.row(1)`; the projection center moves along that normal.
struct PushbroomCamera {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();  // at line cy
  Eigen::Matrix3d axes = Eigen::Matrix3d::Identity();  // rows: sample axis, line axis, viewing axis
  double focal_px = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double line_step = 1.0;  // center motion per line, m

  PixelCoord project(const LocalPoint& p) const;
  Eigen::Vector3d center_at(double line) const;
  /// Unit direction from the projection center into the scene.
  Eigen::Vector3d ray(PixelCoord px) const;
};

struct FitBox {
  double half_x = 100.0;  // local meters around the anchor
  double half_y = 100.0;
  double z_center = 0.0;
  double z_half = 700.0;
};

struct FitResult {
  rfm::Model model;
  double max_residual_px = 0.0;
};

/// Least-squares RFM for an arbitrary projector over a box of the local
/// frame: cubic numerators with unit denominators first, then iterative
/// denominator refinement if needed. Throws FitResidualTooLarge when the
/// residual on an independent check lattice stays at or above tolerance_px.
FitResult fit_rfm(const std::function<PixelCoord(const LocalPoint&)>& projector,
                  const geo::LocalFrame& frame, const FitBox& box, int width, int height,
                  double tolerance_px = 0.01);

/// Exact linear RFM of a parallel projection along `toward_sensor` with
/// image axes east and south.
rfm::Model affine_model(const Eigen::Vector3d& toward_sensor, double gsd, int width, int height,
                        const geo::LocalFrame& frame, const FitBox& box);

struct SceneView {
  ViewSpec spec;
  rfm::Model model;
  Raster image;
  /// Unit vector from the scene center toward the sensor.
  Eigen::Vector3d toward_sensor = Eigen::Vector3d::UnitZ();
  PushbroomCamera camera;  // perspective views only
  /// Per truth-DEM cell: 1 if the cell center sees the sensor.
  std::vector<std::uint8_t> visible;
  std::size_t occluded_cells = 0;

  /// Unit direction from a surface point toward the sensor.
  Eigen::Vector3d direction_to_sensor(const LocalPoint& p) const;
};

struct Scene {
  geo::LocalFrame frame;
  DemGrid truth_dem;
  TriMesh truth_mesh;
  std::vector<SceneView> views;
};

Scene generate_scene(const SceneSpec& spec, std::uint64_t seed);

/// Seeded Gaussian offsets on every vertex (z only if requested).
TriMesh perturb_mesh(const TriMesh& mesh, double sigma, std::uint64_t seed, bool z_only = false);

}  // namespace meshforge::synth
