#include "meshforge/refine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "meshforge/error.hpp"
#include "meshforge/parallel.hpp"

namespace meshforge::refine {

void RefineConfig::validate() const {
  auto fail = [](const char* what) { throw Error(ErrorKind::Config, what); };
  if (!(alpha > 0.0)) fail("alpha must be positive");
  if (!(step_size >= 0.0)) fail("step_size must be non-negative");
  if (!(beta_smooth >= 0.0)) fail("beta_smooth must be non-negative");
  if (beta_scale && !(*beta_scale >= 0.0)) fail("beta_scale must be non-negative");
  if (iterations_per_level < 1) fail("iterations_per_level must be >= 1");
  if (start_level < 0) fail("start_level must be >= 0");
  if (!(min_angle_deg < max_angle_deg)) fail("min_angle must be below max_angle");
  if (zncc_window < 3 || zncc_window % 2 == 0) fail("zncc_window must be odd and >= 3");
  if (!(delta_h > 0.0)) fail("delta_h must be positive");
  if (!(pixels_per_triangle > 0.0)) fail("pixels_per_triangle must be positive");
}

LevelView prepare_view(const View& view, const geo::LocalFrame& frame, int level, double plane_h,
                       double delta_h) {
  const Raster image = downsample(view.image, level);
  const rfm::Model model = view.model.with_image_scale(std::ldexp(1.0, -level));
  LevelView out{build_virtual_camera(model, frame, image, plane_h, delta_h), {}};
  out.gradient = image_gradient(out.camera.intensities);
  return out;
}

namespace {

constexpr double kMinIncidence = 0.2;

struct PixelTerm {
  std::uint32_t face = 0;
  Eigen::Vector3d bary;
  double coef = 0.0;  // dE/d(offset of the surface along its normal), per unit weight
  bool used = false;
};

}  // namespace

PhotometricResult evaluate_photometric(const TriMesh& mesh, const Bvh& bvh,
                                       const std::vector<LevelView>& views, const PairList& pairs,
                                       int window, bool with_gradient) {
  PhotometricResult out;
  const std::size_t nv = mesh.vertex_count();
  out.field.displacement.assign(nv, Eigen::Vector3d::Zero());
  out.field.support.assign(nv, 0);
  out.field.weight.assign(nv, 0.0);
  std::vector<Eigen::Vector3d> grad(nv, Eigen::Vector3d::Zero());

  for (const auto& [i, j] : pairs) {
    if (i >= views.size() || j >= views.size())
      throw Error(ErrorKind::InvalidArgument, "pair index out of range");
    const VirtualCamera& cam_i = views[i].camera;
    const VirtualCamera& cam_j = views[j].camera;

    const Reprojection rep = reproject(bvh, mesh, cam_i, cam_j);
    const SimilarityField sim = zncc_field(cam_i.intensities, rep.image, window);

    // Row-ordered reduction keeps the sum independent of the thread count.
    for (int y = 0; y < sim.score.height(); ++y)
      for (int x = 0; x < sim.score.width(); ++x)
        if (sim.score.valid(x, y)) {
          out.energy += sim.score.at(x, y);
          ++out.valid_pixels;
        }
    if (!with_gradient) continue;

    const std::size_t n = rep.hits.size();
    std::vector<PixelTerm> terms(n);
    parallel_for(static_cast<std::size_t>(cam_i.height), [&](std::size_t y0, std::size_t y1) {
      for (std::size_t k = y0 * cam_i.width; k < y1 * cam_i.width; ++k) {
        if (!rep.ok[k]) continue;
        const double d2m = sim.d2m.values()[k];
        if (d2m == 0.0) continue;
        const PixelHit& ph = rep.hits[k];
        const auto gi = bilinear_gradient(views[j].camera.intensities, ph.target);
        if (!gi) continue;
        rfm::Jacobian jac;
        try {
          jac = geo::chained_jacobian(cam_j.model, cam_j.frame, ph.hit.point);
        } catch (const Error&) {
          continue;
        }
        const Eigen::Vector3d& normal = mesh.face_normals()[ph.hit.face];
        const double cos_incidence = normal.dot(ph.ray_dir);
        if (cos_incidence == 0.0) continue;
        // Near-grazing hits move far along the ray for a small surface change;
        // their weight is bounded instead of exploding.
        const double footprint =
            std::copysign(std::max(std::abs(cos_incidence), kMinIncidence), cos_incidence);
        // Intensity change per meter of travel along the viewing ray of view i.
        const double along_ray = gi->transpose() * jac * ph.ray_dir;
        terms[k] = {ph.hit.face, ph.hit.bary, d2m * along_ray / footprint, true};
      }
    });
    for (const PixelTerm& t : terms) {
      if (!t.used) continue;
      const Face& f = mesh.faces()[t.face];
      const Eigen::Vector3d& normal = mesh.face_normals()[t.face];
      for (int c = 0; c < 3; ++c) {
        const double w = t.bary[c];
        if (w <= 0.0) continue;
        grad[f[c]] += (t.coef * w) * normal;
        ++out.field.support[f[c]];
        out.field.weight[f[c]] += w;
      }
    }
  }
  for (std::size_t v = 0; v < nv; ++v) out.field.displacement[v] = -grad[v];
  return out;
}

GradientField photometric_gradient(const TriMesh& mesh, const Bvh& bvh,
                                   const std::vector<LevelView>& views, const PairList& pairs,
                                   int window) {
  if (pairs.empty()) throw Error(ErrorKind::NoValidPairs, "no stereo pair to evaluate");
  return evaluate_photometric(mesh, bvh, views, pairs, window, true).field;
}

namespace {

double smooth_weight(const RefineConfig& cfg, double gsd) {
  return cfg.beta_scale.value_or(1.0 / (gsd * gsd)) * cfg.beta_smooth;
}

}  // namespace

EnergyTerms energy(const TriMesh& mesh, const Bvh& bvh, const std::vector<LevelView>& views,
                   const PairList& pairs, const RefineConfig& cfg, double gsd) {
  EnergyTerms e;
  e.photo = evaluate_photometric(mesh, bvh, views, pairs, cfg.zncc_window, false).energy;
  e.smooth = thin_plate_energy(mesh);
  e.total = cfg.alpha * e.photo + smooth_weight(cfg, gsd) * e.smooth;
  return e;
}

TriMesh refine_level(TriMesh mesh, const std::vector<LevelView>& views, const PairList& pairs,
                     const RefineConfig& cfg, double gsd, int level,
                     std::vector<EnergyRecord>* log) {
  if (pairs.empty()) throw Error(ErrorKind::NoValidPairs, "no stereo pair to refine with");
  const double wsmooth = smooth_weight(cfg, gsd);
  const double step = cfg.step_size * gsd * gsd;
  for (int it = 0; it <= cfg.iterations_per_level; ++it) {
    const bool update = it < cfg.iterations_per_level;
    const Bvh bvh(mesh);
    const PhotometricResult photo = evaluate_photometric(mesh, bvh, views, pairs, cfg.zncc_window, update);
    const double smooth = thin_plate_energy(mesh);
    if (log) log->push_back({level, it, photo.energy, smooth, cfg.alpha * photo.energy + wsmooth * smooth});
    if (!update) break;

    // One scalar normalization for the whole update keeps it a descent
    // direction of the total energy.
    double weight_sum = 0.0;
    std::size_t supported = 0;
    for (std::size_t v = 0; v < photo.field.weight.size(); ++v)
      if (photo.field.support[v] > 0) {
        weight_sum += photo.field.weight[v];
        ++supported;
      }
    const double scale = supported ? step * static_cast<double>(supported) / weight_sum : 0.0;
    const std::vector<Eigen::Vector3d> fairing = thin_plate_displacement(mesh);
    std::vector<Eigen::Vector3d> delta(mesh.vertex_count());
    for (std::size_t v = 0; v < delta.size(); ++v)
      delta[v] = scale * (cfg.alpha * photo.field.displacement[v] + wsmooth * fairing[v]);
    mesh.displace(delta);
  }
  return mesh;
}

namespace {

double mean_height(const DemGrid& dem) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double h : dem.heights)
    if (std::isfinite(h)) {
      sum += h;
      ++n;
    }
  if (n == 0) throw Error(ErrorKind::EmptyDem, "initial DEM has no valid cell");
  return sum / static_cast<double>(n);
}

double mean_height(const TriMesh& mesh) {
  double sum = 0.0;
  for (const auto& v : mesh.vertices()) sum += v.z();
  return mesh.vertex_count() ? sum / static_cast<double>(mesh.vertex_count()) : 0.0;
}

std::vector<LevelView> prepare_level(const std::vector<View>& views, const geo::LocalFrame& frame,
                                     int level, double plane_h, double delta_h, double* gsd) {
  std::vector<LevelView> out;
  out.reserve(views.size());
  double sum = 0.0;
  for (const View& v : views) {
    out.push_back(prepare_view(v, frame, level, plane_h, delta_h));
    sum += out.back().camera.gsd;
  }
  *gsd = sum / static_cast<double>(views.size());
  return out;
}

int coarse_decimation(const RefineConfig& cfg, double gsd, double cell_size) {
  const double spacing = std::sqrt(2.0 * cfg.pixels_per_triangle) * gsd;
  const double ratio = std::max(1.0, spacing / cell_size);
  return 1 << static_cast<int>(std::lround(std::log2(ratio)));
}

PairList resolve_pairs(const std::vector<View>& views, const geo::LocalFrame& frame,
                       const RefineConfig& cfg) {
  if (!cfg.pairs.empty()) return cfg.pairs;
  std::vector<rfm::Model> models;
  for (const View& v : views) models.push_back(v.model);
  PairList pairs = select_pairs(models, frame, cfg.min_angle_deg, cfg.max_angle_deg);
  if (pairs.empty()) throw Error(ErrorKind::NoValidPairs, "no view pair within the angle range");
  return pairs;
}

RefineResult run_levels(std::optional<TriMesh> start_mesh, const DemGrid* start_dem,
                        const std::vector<View>& views, const geo::LocalFrame& frame,
                        const RefineConfig& cfg, double terrain_z) {
  cfg.validate();
  if (views.size() < 2) throw Error(ErrorKind::NoValidPairs, "at least two views are required");
  RefineResult result;
  result.pairs = resolve_pairs(views, frame, cfg);
  const double plane_h = terrain_z + cfg.plane_offset;

  std::optional<TriMesh> mesh = std::move(start_mesh);
  for (int level = cfg.start_level; level >= 0; --level) {
    double gsd = 0.0;
    const std::vector<LevelView> level_views =
        prepare_level(views, frame, level, plane_h, cfg.delta_h, &gsd);
    if (!mesh) mesh = mesh_from_dem(*start_dem, coarse_decimation(cfg, gsd, start_dem->cell_size));
    mesh = refine_level(std::move(*mesh), level_views, result.pairs, cfg, gsd, level, &result.log);
    if (level > 0) mesh = densify(*mesh);
  }
  result.mesh = std::move(*mesh);
  return result;
}

}  // namespace

RefineResult refine_hierarchical(const DemGrid& initial, const std::vector<View>& views,
                                 const geo::LocalFrame& frame, const RefineConfig& cfg) {
  return run_levels(std::nullopt, &initial, views, frame, cfg, mean_height(initial));
}

RefineResult refine_hierarchical(const TriMesh& initial, const DemGrid& grid,
                                 const std::vector<View>& views, const geo::LocalFrame& frame,
                                 const RefineConfig& cfg) {
  if (cfg.start_level == 0) return run_levels(initial, nullptr, views, frame, cfg, mean_height(initial));
  const DemGrid dem = dem_from_mesh(initial, grid);
  return run_levels(std::nullopt, &dem, views, frame, cfg, mean_height(dem));
}

Eigen::Vector3d view_direction(const rfm::Model& model, const geo::LocalFrame& frame) {
  const PixelCoord center{model.samp_off + model.shift_samp, model.line_off + model.shift_line};
  const double z0 = model.height_off - frame.anchor.height;
  const double dz = 0.5 * model.height_scale;
  const auto lo = inverse_project(model, frame, center, z0);
  const auto hi = inverse_project(model, frame, center, z0 + dz);
  if (!lo || !hi) throw Error(ErrorKind::InverseDivergence, "image center cannot be inverse-projected");
  return (*lo - *hi).normalized();
}

PairList select_pairs(const std::vector<rfm::Model>& models, const geo::LocalFrame& frame,
                      double min_angle_deg, double max_angle_deg) {
  std::vector<Eigen::Vector3d> dirs;
  dirs.reserve(models.size());
  for (const auto& m : models) dirs.push_back(view_direction(m, frame));
  PairList pairs;
  for (std::size_t a = 0; a < dirs.size(); ++a)
    for (std::size_t b = 0; b < dirs.size(); ++b) {
      if (a == b) continue;
      const double angle =
          std::atan2(dirs[a].cross(dirs[b]).norm(), dirs[a].dot(dirs[b])) * 180.0 / std::numbers::pi;
      if (angle >= min_angle_deg && angle <= max_angle_deg) pairs.emplace_back(a, b);
    }
  return pairs;
}

}  // namespace meshforge::refine
