#include "meshforge/raycast.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "meshforge/error.hpp"
#include "meshforge/parallel.hpp"

namespace meshforge {

std::optional<Hit> intersect_triangle(const TriMesh& mesh, std::uint32_t face,
                                      const LocalPoint& origin, const Eigen::Vector3d& dir,
                                      double t_min, double t_max) {
  constexpr double kEdgeTol = 1e-12;
  const Face& f = mesh.faces()[face];
  const auto& v = mesh.vertices();
  const Eigen::Vector3d e1 = v[f[1]] - v[f[0]];
  const Eigen::Vector3d e2 = v[f[2]] - v[f[0]];
  const Eigen::Vector3d p = dir.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-300) return std::nullopt;
  const double inv = 1.0 / det;
  const Eigen::Vector3d s = origin - v[f[0]];
  const double u = s.dot(p) * inv;
  if (u < -kEdgeTol || u > 1.0 + kEdgeTol) return std::nullopt;
  const Eigen::Vector3d q = s.cross(e1);
  const double w = dir.dot(q) * inv;
  if (w < -kEdgeTol || u + w > 1.0 + kEdgeTol) return std::nullopt;
  const double t = e2.dot(q) * inv;
  if (!(t > t_min && t < t_max)) return std::nullopt;
  Hit hit;
  hit.face = face;
  hit.t = t;
  hit.bary = {1.0 - u - w, u, w};
  hit.point = origin + t * dir;
  return hit;
}

bool closer(const Hit& a, const Hit& b) {
  return a.t < b.t || (a.t == b.t && a.face < b.face);
}

Bvh::Bvh(const TriMesh& mesh) {
  const std::size_t nf = mesh.face_count();
  order_.resize(nf);
  std::vector<Eigen::Vector3d> centroids(nf);
  for (std::uint32_t f = 0; f < nf; ++f) {
    order_[f] = f;
    const Face& face = mesh.faces()[f];
    centroids[f] = (mesh.vertices()[face[0]] + mesh.vertices()[face[1]] + mesh.vertices()[face[2]]) / 3.0;
  }
  nodes_.reserve(2 * nf / kLeafSize + 1);
  if (nf > 0) build(mesh, centroids, 0, static_cast<std::uint32_t>(nf));
}

std::uint32_t Bvh::build(const TriMesh& mesh, const std::vector<Eigen::Vector3d>& centroids,
                         std::uint32_t begin, std::uint32_t end) {
  const std::uint32_t id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box;
  Eigen::AlignedBox3d cbox;
  for (std::uint32_t k = begin; k < end; ++k) {
    for (std::uint32_t v : mesh.faces()[order_[k]]) box.extend(mesh.vertices()[v]);
    cbox.extend(centroids[order_[k]]);
  }
  nodes_[id].box = box;
  if (end - begin <= static_cast<std::uint32_t>(kLeafSize)) {
    nodes_[id].first = begin;
    nodes_[id].count = end - begin;
    return id;
  }
  int axis = 0;
  cbox.sizes().maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double ca = centroids[a][axis], cb = centroids[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  const std::uint32_t left = build(mesh, centroids, begin, mid);
  const std::uint32_t right = build(mesh, centroids, mid, end);
  nodes_[id].first = left;
  nodes_[id].right = right;
  nodes_[id].count = 0;
  return id;
}

namespace {

// Slab test; returns the entry distance or +inf on a miss.
double box_entry(const Eigen::AlignedBox3d& box, const LocalPoint& o, const Eigen::Vector3d& inv_dir,
                 double t_min, double t_max) {
  double lo = t_min, hi = t_max;
  for (int a = 0; a < 3; ++a) {
    if (std::isinf(inv_dir[a])) {
      if (o[a] < box.min()[a] || o[a] > box.max()[a]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double t0 = (box.min()[a] - o[a]) * inv_dir[a];
    double t1 = (box.max()[a] - o[a]) * inv_dir[a];
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1 * (1.0 + 4e-16) + 1e-12);
    if (lo > hi) return std::numeric_limits<double>::infinity();
  }
  return lo;
}

}  // namespace

template <typename Visit>
void Bvh::traverse(const LocalPoint& origin, const Eigen::Vector3d& dir, double t_min,
                   double& t_max, Visit&& visit) const {
  if (nodes_.empty()) return;
  Eigen::Vector3d inv_dir;
  for (int a = 0; a < 3; ++a)
    inv_dir[a] = dir[a] == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / dir[a];
  std::uint32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (std::isinf(box_entry(node.box, origin, inv_dir, t_min, t_max))) continue;
    if (node.count > 0) {
      for (std::uint32_t k = node.first; k < node.first + node.count; ++k)
        if (visit(order_[k])) return;
      continue;
    }
    stack[top++] = node.right;
    stack[top++] = node.first;
  }
}

std::optional<Hit> Bvh::intersect(const TriMesh& mesh, const LocalPoint& origin,
                                  const Eigen::Vector3d& dir, double t_min, double t_max) const {
  std::optional<Hit> best;
  double limit = t_max;
  traverse(origin, dir, t_min, limit, [&](std::uint32_t f) {
    // Keep equal-distance candidates reachable for the face-id tie-break.
    if (auto h = intersect_triangle(mesh, f, origin, dir, t_min, std::nextafter(limit, HUGE_VAL))) {
      if (!best || closer(*h, *best)) {
        best = h;
        limit = h->t;
      }
    }
    return false;
  });
  return best;
}

bool Bvh::occluded(const TriMesh& mesh, const LocalPoint& origin, const Eigen::Vector3d& dir,
                   double t_min, double t_max) const {
  bool found = false;
  double limit = t_max;
  traverse(origin, dir, t_min, limit, [&](std::uint32_t f) {
    found = intersect_triangle(mesh, f, origin, dir, t_min, t_max).has_value();
    return found;
  });
  return found;
}

}  // namespace meshforge

namespace meshforge {

std::optional<LocalPoint> inverse_project(const rfm::Model& model, const geo::LocalFrame& frame,
                                          PixelCoord pixel, double z,
                                          const LocalPoint* initial_guess) {
  constexpr int kMaxIterations = 20;
  constexpr double kTolerancePx = 1e-4;
  const double height = frame.anchor.height + z;
  Eigen::Vector3d pn(0.0, 0.0, (height - model.height_off) / model.height_scale);
  if (initial_guess) {
    const GeoPoint g = frame.from_local(*initial_guess);
    const Eigen::Vector3d gn = model.normalize(g);
    pn[0] = gn[0];
    pn[1] = gn[1];
  }
  const Eigen::Vector2d target(pixel.x, pixel.y);
  double residual = std::numeric_limits<double>::infinity();
  try {
    for (int it = 0; it <= kMaxIterations; ++it) {
      const GeoPoint g = model.denormalize(pn);
      const PixelCoord x = rfm::project_unchecked(model, g);
      const Eigen::Vector2d r = Eigen::Vector2d(x.x, x.y) - target;
      residual = r.norm();
      if (residual < 1e-9 || it == kMaxIterations) break;
      const rfm::Jacobian j = rfm::projection_jacobian_unchecked(model, g);
      Eigen::Matrix2d jn;
      jn.col(0) = j.col(0) * model.lat_scale;
      jn.col(1) = j.col(1) * model.lon_scale;
      const double det = jn.determinant();
      if (!(std::abs(det) > 1e-300)) return std::nullopt;
      const Eigen::Vector2d step = jn.inverse() * r;
      pn[0] -= step[0];
      pn[1] -= step[1];
      if (!pn.allFinite() || pn.head<2>().cwiseAbs().maxCoeff() > 1e3) return std::nullopt;
      if (step.norm() < 1e-15) {
        const PixelCoord xf = rfm::project_unchecked(model, model.denormalize(pn));
        residual = (Eigen::Vector2d(xf.x, xf.y) - target).norm();
        break;
      }
    }
  } catch (const Error&) {
    return std::nullopt;
  }
  if (!(residual < kTolerancePx)) return std::nullopt;
  const GeoPoint g = model.denormalize(pn);
  if (model.validity(g) == rfm::Validity::Outside) return std::nullopt;
  LocalPoint out = frame.to_local(g);
  out.z() = z;
  return out;
}

std::optional<Eigen::Vector3d> VirtualCamera::direction_at(PixelCoord p) const {
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) return std::nullopt;
  const int x0 = static_cast<int>(std::floor(p.x));
  const int y0 = static_cast<int>(std::floor(p.y));
  const double tx = p.x - x0, ty = p.y - y0;
  const int x1 = tx > 0.0 ? x0 + 1 : x0;
  const int y1 = ty > 0.0 ? y0 + 1 : y0;
  if (x0 < 0 || y0 < 0 || x1 >= width || y1 >= height) return std::nullopt;
  for (int y : {y0, y1})
    for (int x : {x0, x1})
      if (!ray_valid[index(x, y)]) return std::nullopt;
  const Eigen::Vector3d d = (1 - ty) * ((1 - tx) * direction[index(x0, y0)] + tx * direction[index(x1, y0)]) +
                            ty * ((1 - tx) * direction[index(x0, y1)] + tx * direction[index(x1, y1)]);
  return d.normalized();
}

VirtualCamera build_virtual_camera(const rfm::Model& model, const geo::LocalFrame& frame,
                                   const Raster& image, double plane_h, double delta_h) {
  if (!(delta_h > 0.0)) throw Error(ErrorKind::InvalidArgument, "delta_h must be positive");
  VirtualCamera cam;
  cam.width = image.width();
  cam.height = image.height();
  cam.intensities = image;
  cam.plane_h = plane_h;
  cam.delta_h = delta_h;
  cam.model = model;
  cam.frame = frame;
  const std::size_t n = static_cast<std::size_t>(cam.width) * cam.height;
  cam.origin.assign(n, LocalPoint::Zero());
  cam.direction.assign(n, Eigen::Vector3d::Zero());
  cam.ray_valid.assign(n, 0);

  parallel_for(static_cast<std::size_t>(cam.height), [&](std::size_t y0, std::size_t y1) {
    for (int y = static_cast<int>(y0); y < static_cast<int>(y1); ++y) {
      std::optional<LocalPoint> prev_lo, prev_hi;
      for (int x = 0; x < cam.width; ++x) {
        const PixelCoord px{static_cast<double>(x), static_cast<double>(y)};
        auto lo = inverse_project(model, frame, px, plane_h, prev_lo ? &*prev_lo : nullptr);
        auto hi = inverse_project(model, frame, px, plane_h + delta_h, prev_hi ? &*prev_hi : nullptr);
        prev_lo = lo;
        prev_hi = hi;
        if (!lo || !hi) continue;
        const std::size_t i = cam.index(x, y);
        cam.origin[i] = *lo;
        cam.direction[i] = (*lo - *hi).normalized();
        cam.ray_valid[i] = 1;
      }
    }
  });

  const std::size_t failed =
      n - static_cast<std::size_t>(std::count(cam.ray_valid.begin(), cam.ray_valid.end(), 1));
  if (static_cast<double>(failed) > 1e-3 * static_cast<double>(n))
    throw Error(ErrorKind::InverseDivergence,
                std::to_string(failed) + " of " + std::to_string(n) +
                    " pixels could not be inverse-projected");

  // Ground sampling distance at the model's average terrain height.
  const double terrain_z = model.height_off - frame.anchor.height;
  const int step_x = std::max(1, cam.width / 8);
  const int step_y = std::max(1, cam.height / 8);
  double sum = 0.0;
  int count = 0;
  for (int y = step_y / 2; y < cam.height; y += step_y)
    for (int x = step_x / 2; x + 1 < cam.width; x += step_x) {
      const auto a = inverse_project(model, frame, {double(x), double(y)}, terrain_z);
      const auto b = inverse_project(model, frame, {double(x + 1), double(y)}, terrain_z);
      if (a && b) {
        sum += (*a - *b).norm();
        ++count;
      }
    }
  if (count == 0) throw Error(ErrorKind::InverseDivergence, "cannot determine the GSD");
  cam.gsd = sum / count;
  for (std::size_t i = 0; i < n; ++i)
    if (!cam.ray_valid[i]) cam.intensities.set_valid(static_cast<int>(i % cam.width), static_cast<int>(i / cam.width), false);
  return cam;
}

std::vector<StraightnessRow> validate_ray_straightness(const rfm::Model& model,
                                                       const geo::LocalFrame& frame,
                                                       PixelCoord pixel,
                                                       const std::vector<double>& heights,
                                                       double delta_h) {
  std::vector<StraightnessRow> rows;
  for (double h : heights) {
    const auto lo = inverse_project(model, frame, pixel, h);
    const auto hi = inverse_project(model, frame, pixel, h + delta_h);
    if (!lo || !hi)
      throw Error(ErrorKind::InverseDivergence,
                  "pixel cannot be inverse-projected at height " + std::to_string(h));
    const Eigen::Vector3d d = (*lo - *hi).normalized();
    const double angle = std::atan2(d.head<2>().norm(), -d.z()) * 180.0 / std::numbers::pi;
    rows.push_back({h, angle});
  }
  return rows;
}

bool visibility(const Bvh& bvh, const TriMesh& mesh, const LocalPoint& surface_pt,
                const VirtualCamera& cam) {
  PixelCoord x;
  try {
    x = rfm::project(cam.model, cam.frame.from_local(surface_pt));
  } catch (const Error&) {
    return false;
  }
  const auto d = cam.direction_at(x);
  if (!d || !(d->z() < 0.0)) return false;
  const Eigen::Vector3d up = -*d;
  const LocalPoint start = surface_pt + kOcclusionEpsilon * up;
  const double t_max = (cam.plane_h - start.z()) / up.z();
  if (!(t_max > 0.0)) return true;
  return !bvh.occluded(mesh, start, up, kMinHitDistance, t_max);
}

Reprojection reproject(const Bvh& bvh, const TriMesh& mesh, const VirtualCamera& cam_i,
                       const VirtualCamera& cam_j) {
  Reprojection out;
  out.image = Raster(cam_i.width, cam_i.height);
  const std::size_t n = static_cast<std::size_t>(cam_i.width) * cam_i.height;
  out.hits.assign(n, PixelHit{});
  out.ok.assign(n, 0);
  parallel_for(static_cast<std::size_t>(cam_i.height), [&](std::size_t y0, std::size_t y1) {
    for (std::size_t i = y0 * cam_i.width; i < y1 * cam_i.width; ++i) {
      if (!cam_i.ray_valid[i]) continue;
      const auto hit = bvh.intersect(mesh, cam_i.origin[i], cam_i.direction[i]);
      if (!hit) continue;
      PixelCoord xj;
      try {
        xj = rfm::project(cam_j.model, cam_j.frame.from_local(hit->point));
      } catch (const Error&) {
        continue;
      }
      const auto value = bilinear_sample(cam_j.intensities, xj);
      if (!value) continue;
      if (&cam_i != &cam_j && !visibility(bvh, mesh, hit->point, cam_j)) continue;
      out.image.values()[i] = *value;
      out.hits[i] = {*hit, cam_i.direction[i], xj};
      out.ok[i] = 1;
    }
  });
  for (std::size_t i = 0; i < n; ++i)
    if (!out.ok[i])
      out.image.set_valid(static_cast<int>(i % cam_i.width), static_cast<int>(i / cam_i.width), false);
  return out;
}

}  // namespace meshforge
