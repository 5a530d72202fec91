#include <cmath>

#include "meshforge/mesh.hpp"
#include "meshforge/parallel.hpp"
#include "meshforge/raycast.hpp"

namespace meshforge {

DemGrid dem_from_mesh(const TriMesh& mesh, const DemGrid& grid) {
  DemGrid out = grid.empty_like();
  if (mesh.face_count() == 0) return out;
  const Bvh bvh(mesh);
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& v : mesh.vertices()) top = std::max(top, v.z());
  const double start_z = top + 1.0;
  const Eigen::Vector3d down(0.0, 0.0, -1.0);
  parallel_for(static_cast<std::size_t>(grid.rows), [&](std::size_t r0, std::size_t r1) {
    for (int r = static_cast<int>(r0); r < static_cast<int>(r1); ++r)
      for (int c = 0; c < grid.cols; ++c) {
        const Eigen::Vector2d xy = grid.cell_center(c, r);
        // The first hit of a downward ray from above the mesh is the highest one.
        const auto hit = bvh.intersect(mesh, LocalPoint(xy.x(), xy.y(), start_z), down);
        if (!hit) continue;
        const Face& f = mesh.faces()[hit->face];
        const auto& v = mesh.vertices();
        out.at(c, r) = hit->bary[0] * v[f[0]].z() + hit->bary[1] * v[f[1]].z() +
                       hit->bary[2] * v[f[2]].z();
      }
  });
  return out;
}

}  // namespace meshforge
