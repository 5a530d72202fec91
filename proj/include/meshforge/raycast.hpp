#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "meshforge/geoframe.hpp"
#include "meshforge/imaging.hpp"
#include "meshforge/mesh.hpp"
#include "meshforge/rfm.hpp"

namespace meshforge {

struct Hit {
  std::uint32_t face = 0;
  double t = 0.0;
  Eigen::Vector3d bary = Eigen::Vector3d::Zero();  // weights of face vertices 0, 1, 2
  LocalPoint point = LocalPoint::Zero();
};

inline constexpr double kMinHitDistance = 1e-6;

/// Möller–Trumbore test, inclusive of edges. Returns a hit only for
/// t in (t_min, t_max).
std::optional<Hit> intersect_triangle(const TriMesh& mesh, std::uint32_t face,
                                      const LocalPoint& origin, const Eigen::Vector3d& dir,
                                      double t_min = kMinHitDistance,
                                      double t_max = std::numeric_limits<double>::infinity());

/// Nearest of two candidate hits; equal distances resolve to the lower face id.
bool closer(const Hit& a, const Hit& b);

/// Bounding volume hierarchy over the faces of one mesh state. Rebuild after
/// moving vertices.
class Bvh {
 public:
  static constexpr int kLeafSize = 4;

  Bvh() = default;
  explicit Bvh(const TriMesh& mesh);

  std::optional<Hit> intersect(const TriMesh& mesh, const LocalPoint& origin,
                               const Eigen::Vector3d& dir, double t_min = kMinHitDistance,
                               double t_max = std::numeric_limits<double>::infinity()) const;
  /// True if any face is hit with t in (t_min, t_max).
  bool occluded(const TriMesh& mesh, const LocalPoint& origin, const Eigen::Vector3d& dir,
                double t_min, double t_max) const;

  struct Node {
    Eigen::AlignedBox3d box;
    std::uint32_t first = 0;  // left child (inner) or first face slot (leaf)
    std::uint32_t right = 0;  // right child (inner only)
    std::uint32_t count = 0;  // 0 for inner nodes
  };
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<std::uint32_t>& face_order() const { return order_; }

 private:
  std::uint32_t build(const TriMesh& mesh, const std::vector<Eigen::Vector3d>& centroids,
                      std::uint32_t begin, std::uint32_t end);
  template <typename Visit>
  void traverse(const LocalPoint& origin, const Eigen::Vector3d& dir, double t_min, double& t_max,
                Visit&& visit) const;

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;
};

/// Solves project(model, (lat, lon, frame height z)) = pixel for the
/// planimetric position by Newton iteration. Empty when the iteration
/// diverges or ends outside the model's validity box.
std::optional<LocalPoint> inverse_project(const rfm::Model& model, const geo::LocalFrame& frame,
                                          PixelCoord pixel, double z,
                                          const LocalPoint* initial_guess = nullptr);

/// Straight-ray proxy of a sensor: every pixel is inverse-projected onto the
/// planes z = plane_h and z = plane_h + delta_h; the ray starts on the lower
/// plane and points down, away from the upper one.
struct VirtualCamera {
  int width = 0;
  int height = 0;
  std::vector<LocalPoint> origin;
  std::vector<Eigen::Vector3d> direction;
  std::vector<std::uint8_t> ray_valid;
  Raster intensities;
  double gsd = 0.0;
  double plane_h = 0.0;
  double delta_h = 0.0;
  rfm::Model model;
  geo::LocalFrame frame;

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(x);
  }
  /// Bilinearly interpolated unit ray direction; empty outside the image or
  /// next to pixels without a ray.
  std::optional<Eigen::Vector3d> direction_at(PixelCoord p) const;
};

/// Throws InverseDivergence if more than 0.1% of the pixels have no ray.
VirtualCamera build_virtual_camera(const rfm::Model& model, const geo::LocalFrame& frame,
                                   const Raster& image, double plane_h, double delta_h);

struct StraightnessRow {
  double height = 0.0;
  double off_nadir_deg = 0.0;
};

/// Off-nadir angle of the virtual ray through one pixel, built from planes
/// at each listed height and height + delta_h.
std::vector<StraightnessRow> validate_ray_straightness(const rfm::Model& model,
                                                       const geo::LocalFrame& frame,
                                                       PixelCoord pixel,
                                                       const std::vector<double>& heights,
                                                       double delta_h = 100.0);

/// Offset along the ray used to leave the surface when testing occlusion.
inline constexpr double kOcclusionEpsilon = 1e-3;

/// True if the path from the surface point toward the camera, up to the
/// camera's ray-origin plane, is free.
bool visibility(const Bvh& bvh, const TriMesh& mesh, const LocalPoint& surface_pt,
                const VirtualCamera& cam);

struct PixelHit {
  Hit hit;
  Eigen::Vector3d ray_dir = Eigen::Vector3d::Zero();
  PixelCoord target;  // position in the second image
};

struct Reprojection {
  Raster image;                  // second image resampled into the first view
  std::vector<PixelHit> hits;    // per pixel of the first view
  std::vector<std::uint8_t> ok;  // 1 where image is valid
};

/// Transfers the second view's intensities into the first view through the
/// mesh. Pixels are masked on a miss, when the hit falls outside the second
/// image, or when the hit is occluded from the second view.
Reprojection reproject(const Bvh& bvh, const TriMesh& mesh, const VirtualCamera& cam_i,
                       const VirtualCamera& cam_j);

}  // namespace meshforge
