#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "meshforge/imaging.hpp"
#include "meshforge/mesh.hpp"
#include "meshforge/raycast.hpp"
#include "meshforge/rfm.hpp"

namespace meshforge::refine {

using PairList = std::vector<std::pair<std::size_t, std::size_t>>;

struct RefineConfig {
  double alpha = 1.0;
  double beta_smooth = 0.05;
  /// Homogenization factor; 1/gsd² of the current level when unset.
  std::optional<double> beta_scale;
  /// Dimensionless; the vertex update step is step_size * gsd².
  double step_size = 4.0;
  int iterations_per_level = 20;
  int start_level = 0;
  /// Ordered (reference, source) view pairs; selected by angle when empty.
  PairList pairs;
  double min_angle_deg = 5.0;
  double max_angle_deg = 13.0;
  int zncc_window = 7;
  /// Ray origin plane height above the mean terrain height, and the spacing
  /// of the second plane.
  double plane_offset = 500.0;
  double delta_h = 100.0;
  double pixels_per_triangle = 2.0;

  /// Throws Config on out-of-range values.
  void validate() const;
};

/// One input image with its sensor model at full resolution.
struct View {
  rfm::Model model;
  Raster image;
};

/// A view prepared for one pyramid level.
struct LevelView {
  VirtualCamera camera;
  ImageGradient gradient;
};

LevelView prepare_view(const View& view, const geo::LocalFrame& frame, int level, double plane_h,
                       double delta_h);

/// Per-vertex descent directions of the photometric energy (the negative
/// energy gradient) with the number of contributing pixels and the sum of
/// their barycentric weights.
struct GradientField {
  std::vector<Eigen::Vector3d> displacement;
  std::vector<std::uint32_t> support;
  std::vector<double> weight;
};

struct PhotometricResult {
  GradientField field;
  double energy = 0.0;          // sum of -ZNCC over valid window centers of all pairs
  std::size_t valid_pixels = 0;
};

/// Transfers every pair, scores it with windowed ZNCC and, if requested,
/// splats the per-pixel surface gradient onto the hit faces' vertices.
PhotometricResult evaluate_photometric(const TriMesh& mesh, const Bvh& bvh,
                                       const std::vector<LevelView>& views, const PairList& pairs,
                                       int window, bool with_gradient = true);

/// Throws NoValidPairs for an empty pair list.
GradientField photometric_gradient(const TriMesh& mesh, const Bvh& bvh,
                                   const std::vector<LevelView>& views, const PairList& pairs,
                                   int window);

struct EnergyTerms {
  double photo = 0.0;
  double smooth = 0.0;
  double total = 0.0;
};

EnergyTerms energy(const TriMesh& mesh, const Bvh& bvh, const std::vector<LevelView>& views,
                   const PairList& pairs, const RefineConfig& cfg, double gsd);

struct EnergyRecord {
  int level = 0;
  int iteration = 0;
  double photo = 0.0;
  double smooth = 0.0;
  double total = 0.0;
};

/// Runs the configured number of gradient-descent iterations at one level.
/// Appends one record per iteration plus one for the final state.
TriMesh refine_level(TriMesh mesh, const std::vector<LevelView>& views, const PairList& pairs,
                     const RefineConfig& cfg, double gsd, int level,
                     std::vector<EnergyRecord>* log = nullptr);

struct RefineResult {
  TriMesh mesh;
  std::vector<EnergyRecord> log;
  PairList pairs;
};

/// Coarse-to-fine refinement starting from a DEM: the start mesh is the
/// DEM triangulated at about pixels_per_triangle on the coarsest level.
RefineResult refine_hierarchical(const DemGrid& initial, const std::vector<View>& views,
                                 const geo::LocalFrame& frame, const RefineConfig& cfg);

/// As above from a mesh. With start_level 0 the mesh is refined as given;
/// otherwise it is resampled onto `grid` and re-triangulated coarsely.
RefineResult refine_hierarchical(const TriMesh& initial, const DemGrid& grid,
                                 const std::vector<View>& views, const geo::LocalFrame& frame,
                                 const RefineConfig& cfg);

/// Mean viewing direction through the image center.
Eigen::Vector3d view_direction(const rfm::Model& model, const geo::LocalFrame& frame);

/// Ordered pairs whose viewing directions intersect at an angle within
/// [min_angle, max_angle] degrees.
PairList select_pairs(const std::vector<rfm::Model>& models, const geo::LocalFrame& frame,
                      double min_angle_deg, double max_angle_deg);

}  // namespace meshforge::refine
