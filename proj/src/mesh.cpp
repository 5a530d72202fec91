#include "meshforge/mesh.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "meshforge/error.hpp"

namespace meshforge {
namespace {

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

}  // namespace

TriMesh::TriMesh(std::vector<LocalPoint> vertices, std::vector<Face> faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {
  for (const Face& f : faces_)
    for (std::uint32_t v : f)
      if (v >= vertices_.size()) throw Error(ErrorKind::InvalidArgument, "face index out of range");
  for (std::size_t f = 0; f < faces_.size(); ++f)
    if (!(face_area(f) > 1e-9)) throw Error(ErrorKind::InvalidArgument, "degenerate face");
  build_topology();
  update_normals();
}

void TriMesh::build_topology() {
  const std::size_t nv = vertices_.size();
  one_ring_.assign(nv, {});
  neighbors_.assign(nv, {});
  boundary_.assign(nv, 0);
  std::unordered_map<std::uint64_t, int> edge_use;
  edge_use.reserve(faces_.size() * 3);
  for (std::uint32_t f = 0; f < faces_.size(); ++f) {
    const Face& face = faces_[f];
    for (int k = 0; k < 3; ++k) {
      one_ring_[face[k]].push_back(f);
      const std::uint32_t a = face[k], b = face[(k + 1) % 3];
      neighbors_[a].push_back(b);
      neighbors_[b].push_back(a);
      ++edge_use[edge_key(a, b)];
    }
  }
  for (auto& n : neighbors_) {
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
  }
  edge_count_ = edge_use.size();
  for (const auto& [key, count] : edge_use)
    if (count == 1) {
      boundary_[static_cast<std::uint32_t>(key >> 32)] = 1;
      boundary_[static_cast<std::uint32_t>(key & 0xffffffffu)] = 1;
    }
}

void TriMesh::update_normals() {
  face_normals_.resize(faces_.size());
  vertex_normals_.assign(vertices_.size(), Eigen::Vector3d::Zero());
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    const Face& face = faces_[f];
    const Eigen::Vector3d cross =
        (vertices_[face[1]] - vertices_[face[0]]).cross(vertices_[face[2]] - vertices_[face[0]]);
    const double len = cross.norm();
    face_normals_[f] = len > 0.0 ? Eigen::Vector3d(cross / len) : Eigen::Vector3d::UnitZ();
    // area weighting: |cross| = 2 * area
    for (std::uint32_t v : face) vertex_normals_[v] += cross;
  }
  for (auto& n : vertex_normals_) {
    const double len = n.norm();
    n = len > 0.0 ? Eigen::Vector3d(n / len) : Eigen::Vector3d::UnitZ();
  }
}

double TriMesh::face_area(std::size_t f) const {
  const Face& face = faces_[f];
  return 0.5 *
         (vertices_[face[1]] - vertices_[face[0]]).cross(vertices_[face[2]] - vertices_[face[0]]).norm();
}

double TriMesh::total_area() const {
  double sum = 0.0;
  for (std::size_t f = 0; f < faces_.size(); ++f) sum += face_area(f);
  return sum;
}

void TriMesh::set_vertices(std::vector<LocalPoint> vertices) {
  if (vertices.size() != vertices_.size())
    throw Error(ErrorKind::InvalidArgument, "vertex count mismatch");
  vertices_ = std::move(vertices);
  update_normals();
}

void TriMesh::displace(std::span<const Eigen::Vector3d> delta) {
  if (delta.size() != vertices_.size())
    throw Error(ErrorKind::InvalidArgument, "displacement count mismatch");
  for (std::size_t v = 0; v < vertices_.size(); ++v) vertices_[v] += delta[v];
  update_normals();
}

DemGrid::DemGrid(double ox, double oy, double cs, int c, int r, double fill)
    : origin_x(ox), origin_y(oy), cell_size(cs), cols(c), rows(r),
      heights(static_cast<std::size_t>(std::max(c, 0)) * std::max(r, 0), fill) {
  if (!(cs > 0.0)) throw Error(ErrorKind::InvalidArgument, "DEM cell size must be positive");
}

std::size_t DemGrid::valid_count() const {
  return static_cast<std::size_t>(
      std::count_if(heights.begin(), heights.end(), [](double h) { return std::isfinite(h); }));
}

DemGrid DemGrid::empty_like() const {
  DemGrid out(origin_x, origin_y, cell_size, cols, rows);
  out.nodata = nodata;
  return out;
}

TriMesh mesh_from_dem(const DemGrid& dem, int decimation) {
  if (decimation < 1 || (decimation & (decimation - 1)) != 0)
    throw Error(ErrorKind::InvalidArgument, "decimation must be a power of two");
  const int nx = (dem.cols + decimation - 1) / decimation;
  const int ny = (dem.rows + decimation - 1) / decimation;
  constexpr std::uint32_t kNone = 0xffffffffu;

  std::vector<LocalPoint> samples;
  std::vector<std::uint32_t> sample_id(static_cast<std::size_t>(nx) * ny, kNone);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      double sx = 0.0, sy = 0.0, sz = 0.0;
      int n_cells = 0, n_valid = 0;
      for (int r = j * decimation; r < std::min((j + 1) * decimation, dem.rows); ++r)
        for (int c = i * decimation; c < std::min((i + 1) * decimation, dem.cols); ++c) {
          const Eigen::Vector2d ctr = dem.cell_center(c, r);
          sx += ctr.x();
          sy += ctr.y();
          ++n_cells;
          if (dem.has(c, r)) {
            sz += dem.at(c, r);
            ++n_valid;
          }
        }
      if (n_valid == 0) continue;
      sample_id[static_cast<std::size_t>(j) * nx + i] = static_cast<std::uint32_t>(samples.size());
      samples.emplace_back(sx / n_cells, sy / n_cells, sz / n_valid);
    }

  std::vector<Face> faces;
  for (int j = 0; j + 1 < ny; ++j)
    for (int i = 0; i + 1 < nx; ++i) {
      const std::uint32_t v00 = sample_id[static_cast<std::size_t>(j) * nx + i];
      const std::uint32_t v01 = sample_id[static_cast<std::size_t>(j) * nx + i + 1];
      const std::uint32_t v10 = sample_id[static_cast<std::size_t>(j + 1) * nx + i];
      const std::uint32_t v11 = sample_id[static_cast<std::size_t>(j + 1) * nx + i + 1];
      if (v00 == kNone || v01 == kNone || v10 == kNone || v11 == kNone) continue;
      faces.push_back({v00, v01, v11});
      faces.push_back({v00, v11, v10});
    }
  if (faces.empty()) throw Error(ErrorKind::EmptyDem, "no complete grid cell at this decimation");

  // Drop samples that ended up in no face; survivors keep row-major order.
  std::vector<std::uint32_t> remap(samples.size(), kNone);
  for (const Face& f : faces)
    for (std::uint32_t v : f) remap[v] = 0;
  std::vector<LocalPoint> vertices;
  for (std::uint32_t s = 0; s < samples.size(); ++s)
    if (remap[s] != kNone) {
      remap[s] = static_cast<std::uint32_t>(vertices.size());
      vertices.push_back(samples[s]);
    }
  for (Face& f : faces)
    for (std::uint32_t& v : f) v = remap[v];
  return TriMesh(std::move(vertices), std::move(faces));
}

TriMesh densify(const TriMesh& mesh) {
  std::vector<LocalPoint> vertices = mesh.vertices();
  std::vector<Face> faces;
  faces.reserve(mesh.face_count() * 4);
  std::unordered_map<std::uint64_t, std::uint32_t> midpoint;
  midpoint.reserve(mesh.edge_count());
  auto mid = [&](std::uint32_t a, std::uint32_t b) {
    const auto [it, inserted] =
        midpoint.try_emplace(edge_key(a, b), static_cast<std::uint32_t>(vertices.size()));
    if (inserted) vertices.push_back(0.5 * (vertices[a] + vertices[b]));
    return it->second;
  };
  for (const Face& f : mesh.faces()) {
    const std::uint32_t ab = mid(f[0], f[1]);
    const std::uint32_t bc = mid(f[1], f[2]);
    const std::uint32_t ca = mid(f[2], f[0]);
    faces.push_back({f[0], ab, ca});
    faces.push_back({ab, f[1], bc});
    faces.push_back({ca, bc, f[2]});
    faces.push_back({ab, bc, ca});
  }
  return TriMesh(std::move(vertices), std::move(faces));
}

std::vector<Eigen::Vector3d> umbrella_laplacian(const TriMesh& mesh) {
  const auto& verts = mesh.vertices();
  std::vector<Eigen::Vector3d> lap(verts.size(), Eigen::Vector3d::Zero());
  for (std::uint32_t v = 0; v < verts.size(); ++v) {
    const auto& nb = mesh.neighbors(v);
    if (nb.empty() || mesh.is_boundary(v)) continue;
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (std::uint32_t u : nb) sum += verts[u];
    lap[v] = sum / static_cast<double>(nb.size()) - verts[v];
  }
  return lap;
}

std::vector<Eigen::Vector3d> thin_plate_displacement(const TriMesh& mesh) {
  const std::vector<Eigen::Vector3d> lap = umbrella_laplacian(mesh);
  std::vector<Eigen::Vector3d> out(lap.size(), Eigen::Vector3d::Zero());
  for (std::uint32_t v = 0; v < lap.size(); ++v) {
    const auto& nb = mesh.neighbors(v);
    if (nb.empty() || mesh.is_boundary(v)) continue;
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (std::uint32_t u : nb) sum += lap[u];
    out[v] = -(sum / static_cast<double>(nb.size()) - lap[v]);
  }
  return out;
}

double thin_plate_energy(const TriMesh& mesh) {
  double e = 0.0;
  for (const auto& l : umbrella_laplacian(mesh)) e += l.squaredNorm();
  return e;
}

}  // namespace meshforge
