#pragma once

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "meshforge/geoframe.hpp"

namespace meshforge {

using Face = std::array<std::uint32_t, 3>;

/// Indexed triangle surface in local metric coordinates. Faces are
/// counter-clockwise seen from +z; normals follow the right-hand rule.
class TriMesh {
 public:
  TriMesh() = default;
  /// Throws InvalidArgument on out-of-range indices or faces with area <= 1e-9 m².
  TriMesh(std::vector<LocalPoint> vertices, std::vector<Face> faces);

  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t face_count() const { return faces_.size(); }

  const std::vector<LocalPoint>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  const std::vector<Eigen::Vector3d>& vertex_normals() const { return vertex_normals_; }
  const std::vector<Eigen::Vector3d>& face_normals() const { return face_normals_; }

  /// Faces incident to vertex v.
  const std::vector<std::uint32_t>& one_ring(std::uint32_t v) const { return one_ring_[v]; }
  /// Vertices sharing an edge with v, ascending.
  const std::vector<std::uint32_t>& neighbors(std::uint32_t v) const { return neighbors_[v]; }
  /// True if v lies on an edge used by exactly one face.
  bool is_boundary(std::uint32_t v) const { return boundary_[v] != 0; }

  double face_area(std::size_t f) const;
  double total_area() const;
  std::size_t edge_count() const { return edge_count_; }

  /// Replaces vertex positions (same count) and recomputes normals.
  void set_vertices(std::vector<LocalPoint> vertices);
  /// Adds per-vertex displacements and recomputes normals.
  void displace(std::span<const Eigen::Vector3d> delta);

  bool operator==(const TriMesh& other) const {
    return vertices_ == other.vertices_ && faces_ == other.faces_;
  }

 private:
  void build_topology();
  void update_normals();

  std::vector<LocalPoint> vertices_;
  std::vector<Face> faces_;
  std::vector<Eigen::Vector3d> vertex_normals_;
  std::vector<Eigen::Vector3d> face_normals_;
  std::vector<std::vector<std::uint32_t>> one_ring_;
  std::vector<std::vector<std::uint32_t>> neighbors_;
  std::vector<std::uint8_t> boundary_;
  std::size_t edge_count_ = 0;
};

/// Planimetric height raster. Cell (col, row) has its center at
/// origin + (col, row) * cell_size; rows run toward +y (north). Missing cells
/// hold NaN; `nodata` is the sentinel used on disk.
struct DemGrid {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double cell_size = 1.0;
  int cols = 0;
  int rows = 0;
  std::vector<double> heights;
  double nodata = -9999.0;

  DemGrid() = default;
  DemGrid(double origin_x, double origin_y, double cell_size, int cols, int rows,
          double fill = std::numeric_limits<double>::quiet_NaN());

  double& at(int col, int row) { return heights[index(col, row)]; }
  double at(int col, int row) const { return heights[index(col, row)]; }
  bool has(int col, int row) const { return std::isfinite(at(col, row)); }
  std::size_t index(int col, int row) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(cols) +
           static_cast<std::size_t>(col);
  }
  Eigen::Vector2d cell_center(int col, int row) const {
    return {origin_x + col * cell_size, origin_y + row * cell_size};
  }
  std::size_t valid_count() const;
  /// Same footprint, every cell missing.
  DemGrid empty_like() const;
};

/// Triangulates block means of the DEM at `decimation` cells per vertex.
/// Every grid quad is split along the same diagonal; quads touching a
/// missing sample are skipped. Throws EmptyDem if no face results.
TriMesh mesh_from_dem(const DemGrid& dem, int decimation);

/// 1→4 midpoint subdivision with shared edges split once.
TriMesh densify(const TriMesh& mesh);

/// Uniform umbrella Laplacian, zero on boundary and isolated vertices.
std::vector<Eigen::Vector3d> umbrella_laplacian(const TriMesh& mesh);
/// -Δ²v per vertex: the descent direction of the discrete thin-plate energy.
std::vector<Eigen::Vector3d> thin_plate_displacement(const TriMesh& mesh);
/// Σ |Δv|².
double thin_plate_energy(const TriMesh& mesh);

/// Highest intersection of a vertical ray through each cell center of
/// `grid` with the mesh; NaN where no face is hit.
DemGrid dem_from_mesh(const TriMesh& mesh, const DemGrid& grid);

}  // namespace meshforge
