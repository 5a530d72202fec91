#include "meshforge/synth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "meshforge/error.hpp"
#include "meshforge/parallel.hpp"
#include "meshforge/raycast.hpp"

namespace meshforge::synth {

namespace {

constexpr double kPi = std::numbers::pi;

double deg2rad(double d) { return d * kPi / 180.0; }

Eigen::Vector3d toward(const ViewSpec& v) {
  const double t = deg2rad(v.off_nadir_deg), a = deg2rad(v.azimuth_deg);
  return {std::sin(t) * std::sin(a), std::sin(t) * std::cos(a), std::cos(t)};
}

// Horizontal unit direction with a small vertical component so that every
// wave still varies across the ground plane.
Eigen::Vector3d wave_direction(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
  std::uniform_real_distribution<double> tilt(-0.5, 0.5);
  const double phi = angle(rng);
  return Eigen::Vector3d(std::cos(phi), std::sin(phi), tilt(rng)).normalized();
}

}  // namespace

void SceneSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::Config, what); };
  if (!(extent > 0.0)) fail("scene extent must be positive");
  if (!(gsd > 0.0)) fail("scene gsd must be positive");
  if (image_width < 8 || image_height < 8) fail("image must be at least 8x8 pixels");
  if (views.size() < 2) fail("a scene needs at least two views");
  for (const auto& v : views)
    if (!(v.off_nadir_deg >= 0.0 && v.off_nadir_deg < 60.0)) fail("off-nadir angle must be in [0, 60)");
  if (!(model_height_scale > 0.0)) fail("model_height_scale must be positive");
  if (!(sensor_range > 10.0 * extent)) fail("sensor_range too short for the scene");
  if (texture.octaves < 1 || texture.components_per_octave < 1) fail("texture needs at least one wave");
  if (!(texture.min_wavelength_px > 0.0)) fail("texture wavelength must be positive");
  for (const auto& b : terrain.boxes)
    if (!(b.half_x > 0.0 && b.half_y > 0.0)) fail("box half sizes must be positive");
}

double terrain_height(const TerrainSpec& t, std::uint64_t seed, double x, double y) {
  double h = t.base_height;
  switch (t.kind) {
    case TerrainKind::Flat:
    case TerrainKind::Boxes:
      break;
    case TerrainKind::Ramp:
      h += t.slope_x * x + t.slope_y * y;
      break;
    case TerrainKind::Fractal: {
      std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
      std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
      for (int o = 0; o < t.hill_octaves; ++o) {
        const double wl = t.hill_wavelength / std::ldexp(1.0, o);
        const double amp = t.hill_amplitude / std::ldexp(1.0, o + 1);
        for (int c = 0; c < 2; ++c) {
          const double phi = angle(rng), phase = angle(rng);
          h += amp * std::sin(2.0 * kPi / wl * (std::cos(phi) * x + std::sin(phi) * y) + phase);
        }
      }
      break;
    }
  }
  double raise = 0.0;
  for (const auto& b : t.boxes)
    if (std::abs(x - b.center_x) < b.half_x && std::abs(y - b.center_y) < b.half_y)
      raise = std::max(raise, b.height);
  return h + raise;
}

Texture::Texture(const TextureSpec& spec, double gsd, std::uint64_t seed) : mean_(spec.mean) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  const int n = spec.octaves * spec.components_per_octave;
  const double amplitude = spec.contrast / n;
  for (int o = 0; o < spec.octaves; ++o) {
    const double wl = spec.min_wavelength_px * gsd * std::ldexp(1.0, o);
    for (int c = 0; c < spec.components_per_octave; ++c) {
      const Eigen::Vector3d dir = wave_direction(rng);
      waves_.push_back({dir * (2.0 * kPi / wl), phase(rng), amplitude});
    }
  }
}

double Texture::operator()(const LocalPoint& p) const {
  double v = mean_;
  for (const Wave& w : waves_) v += w.amplitude * std::sin(w.k.dot(p) + w.phase);
  return v;
}

Eigen::Vector3d PushbroomCamera::center_at(double line) const {
  return center + (line - cy) * line_step * axes.row(1).transpose();
}

PixelCoord PushbroomCamera::project(const LocalPoint& p) const {
  const double line = cy + (p - center).dot(axes.row(1).transpose()) / line_step;
  const Eigen::Vector3d q = axes * (p - center_at(line));
  return {cx + focal_px * q.x() / q.z(), line};
}

Eigen::Vector3d PushbroomCamera::ray(PixelCoord px) const {
  const Eigen::Vector3d v((px.x - cx) / focal_px, 0.0, 1.0);
  return (axes.transpose() * v).normalized();
}

FitResult fit_rfm(const std::function<PixelCoord(const LocalPoint&)>& projector,
                  const geo::LocalFrame& frame, const FitBox& box, int width, int height,
                  double tolerance_px) {
  rfm::Model m;
  m.lat_off = frame.anchor.lat;
  m.lon_off = frame.anchor.lon;
  m.lat_scale = box.half_y * frame.deg_lat_per_m;
  m.lon_scale = box.half_x * frame.deg_lon_per_m;
  m.height_off = frame.anchor.height + box.z_center;
  m.height_scale = box.z_half;
  m.samp_off = 0.5 * width;
  m.samp_scale = 0.5 * width;
  m.line_off = 0.5 * height;
  m.line_scale = 0.5 * height;

  struct Sample {
    rfm::Basis basis;
    double s, l;
  };
  auto lattice = [&](int n, double shift) {
    std::vector<Sample> out;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          auto c = [&](int a) { return -1.0 + (2.0 * (a + shift)) / (n - 1 + 2.0 * shift); };
          const Eigen::Vector3d pn(c(i), c(j), c(k));
          const PixelCoord px = projector(frame.to_local(m.denormalize(pn)));
          out.push_back({rfm::poly_basis(pn), (px.x - m.samp_off) / m.samp_scale,
                         (px.y - m.line_off) / m.line_scale});
        }
    return out;
  };
  const std::vector<Sample> fit = lattice(11, 0.0);
  const std::vector<Sample> check = lattice(10, 0.5);

  const auto rows = static_cast<Eigen::Index>(fit.size());
  Eigen::MatrixXd a(rows, 20);
  Eigen::VectorXd ts(rows), tl(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    a.row(r) = fit[r].basis.transpose();
    ts[r] = fit[r].s;
    tl[r] = fit[r].l;
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  auto store = [](const Eigen::VectorXd& v, rfm::Coefficients& c, int offset, int count) {
    for (int i = 0; i < count; ++i) c[i + (20 - count)] = v[offset + i];
  };
  const Eigen::VectorXd cs = qr.solve(ts), cl = qr.solve(tl);
  store(cs, m.num_samp, 0, 20);
  store(cl, m.num_line, 0, 20);
  m.den_samp.fill(0.0);
  m.den_line.fill(0.0);
  m.den_samp[0] = m.den_line[0] = 1.0;

  auto residual = [&](const rfm::Model& model) {
    double worst = 0.0;
    for (const Sample& s : check) {
      auto ratio = [&](const rfm::Coefficients& n, const rfm::Coefficients& d) {
        double nv = 0.0, dv = 0.0;
        for (int i = 0; i < 20; ++i) {
          nv += n[i] * s.basis[i];
          dv += d[i] * s.basis[i];
        }
        return nv / dv;
      };
      const double ds = (ratio(model.num_samp, model.den_samp) - s.s) * model.samp_scale;
      const double dl = (ratio(model.num_line, model.den_line) - s.l) * model.line_scale;
      worst = std::max(worst, std::hypot(ds, dl));
    }
    return worst;
  };

  double worst = residual(m);
  if (!(worst < 0.1 * tolerance_px)) {
    // Denominator refinement: linearized in (num, den[1..]) with the
    // previous denominator as weight.
    auto refine_axis = [&](const Eigen::VectorXd& target, rfm::Coefficients& num,
                           rfm::Coefficients& den) {
      for (int it = 0; it < 10; ++it) {
        Eigen::MatrixXd b(rows, 39);
        Eigen::VectorXd rhs(rows);
        for (Eigen::Index r = 0; r < rows; ++r) {
          double dv = 0.0;
          for (int i = 0; i < 20; ++i) dv += den[i] * fit[r].basis[i];
          const double w = 1.0 / dv;
          b.row(r).head(20) = w * fit[r].basis.transpose();
          b.row(r).tail(19) = -w * target[r] * fit[r].basis.tail(19).transpose();
          rhs[r] = w * target[r];
        }
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(b);
        cod.setThreshold(1e-12);
        const Eigen::VectorXd x = cod.solve(rhs);
        store(x, num, 0, 20);
        store(x, den, 20, 19);
        den[0] = 1.0;
      }
    };
    rfm::Model refined = m;
    refine_axis(ts, refined.num_samp, refined.den_samp);
    refine_axis(tl, refined.num_line, refined.den_line);
    const double refined_worst = residual(refined);
    if (refined_worst < worst) {
      m = refined;
      worst = refined_worst;
    }
  }
  if (!(worst < tolerance_px))
    throw Error(ErrorKind::FitResidualTooLarge,
                "RFM fit residual " + std::to_string(worst) + " px exceeds tolerance");
  m.validate();
  return {m, worst};
}

rfm::Model affine_model(const Eigen::Vector3d& d, double gsd, int width, int height,
                        const geo::LocalFrame& frame, const FitBox& box) {
  rfm::Model m;
  m.lat_off = frame.anchor.lat;
  m.lon_off = frame.anchor.lon;
  m.lat_scale = box.half_y * frame.deg_lat_per_m;
  m.lon_scale = box.half_x * frame.deg_lon_per_m;
  m.height_off = frame.anchor.height + box.z_center;
  m.height_scale = box.z_half;
  m.samp_off = 0.5 * width;
  m.samp_scale = 0.5 * width;
  m.line_off = 0.5 * height;
  m.line_scale = 0.5 * height;

  // sample = (x - dz * tx) / gsd + cx, line = -(y - dz * ty) / gsd + cy with
  // dz the height above the reference plane and (tx, ty) = d_xy / d_z.
  const double tx = d.x() / d.z(), ty = d.y() / d.z();
  const double cx = 0.5 * (width - 1), cy = 0.5 * (height - 1);
  const double kx = box.half_x, ky = box.half_y, hs = box.z_half;
  m.num_samp.fill(0.0);
  m.num_line.fill(0.0);
  m.den_samp.fill(0.0);
  m.den_line.fill(0.0);
  m.den_samp[0] = m.den_line[0] = 1.0;
  m.num_samp[0] = (cx - m.samp_off) / m.samp_scale;
  m.num_samp[1] = kx / (gsd * m.samp_scale);
  m.num_samp[3] = -tx * hs / (gsd * m.samp_scale);
  m.num_line[0] = (cy - m.line_off) / m.line_scale;
  m.num_line[2] = -ky / (gsd * m.line_scale);
  m.num_line[3] = ty * hs / (gsd * m.line_scale);
  m.validate();
  return m;
}

Eigen::Vector3d SceneView::direction_to_sensor(const LocalPoint& p) const {
  if (spec.kind == ModelKind::Affine) return toward_sensor;
  return (camera.center_at(camera.project(p).y) - p).normalized();
}

Scene generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  Scene scene;
  scene.frame = geo::build_frame(spec.anchor);

  const int cells = std::max(2, static_cast<int>(std::lround(spec.extent / spec.gsd)));
  const double origin = -0.5 * (cells - 1) * spec.gsd;
  scene.truth_dem = DemGrid(origin, origin, spec.gsd, cells, cells);
  double zmax = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < cells; ++r)
    for (int c = 0; c < cells; ++c) {
      const Eigen::Vector2d p = scene.truth_dem.cell_center(c, r);
      const double h = terrain_height(spec.terrain, seed, p.x(), p.y());
      scene.truth_dem.at(c, r) = h;
      zmax = std::max(zmax, h);
    }
  scene.truth_mesh = mesh_from_dem(scene.truth_dem, 1);
  const Bvh bvh(scene.truth_mesh);
  const Texture texture(spec.texture, spec.gsd, seed + 1);

  const double base = spec.terrain.base_height;
  const double top = zmax + 10.0;
  const int w = spec.image_width, h = spec.image_height;
  const double cx = 0.5 * (w - 1), cy = 0.5 * (h - 1);

  for (const ViewSpec& vs : spec.views) {
    SceneView view;
    view.spec = vs;
    view.toward_sensor = toward(vs);
    const double tan_t = std::tan(deg2rad(vs.off_nadir_deg));
    FitBox box;
    box.half_x = box.half_y =
        0.55 * std::max(w, h) * spec.gsd + spec.model_height_scale * tan_t + 10.0;
    box.z_center = base;
    box.z_half = spec.model_height_scale;

    const Eigen::Vector3d d = view.toward_sensor;
    if (vs.kind == ModelKind::Affine) {
      view.model = affine_model(d, spec.gsd, w, h, scene.frame, box);
    } else {
      PushbroomCamera& cam = view.camera;
      const double az = deg2rad(vs.azimuth_deg);
      cam.axes.row(2) = -d.transpose();
      cam.axes.row(0) = Eigen::RowVector3d(std::cos(az), -std::sin(az), 0.0);
      cam.axes.row(1) = cam.axes.row(2).cross(cam.axes.row(0));
      cam.center = Eigen::Vector3d(0.0, 0.0, base) + spec.sensor_range * d;
      cam.focal_px = spec.sensor_range / spec.gsd;
      cam.cx = cx;
      cam.cy = cy;
      cam.line_step = spec.gsd * std::cos(deg2rad(vs.off_nadir_deg));
      view.model = fit_rfm([&cam](const LocalPoint& p) { return cam.project(p); }, scene.frame,
                           box, w, h)
                       .model;
    }

    view.image = Raster(w, h);
    std::vector<std::uint8_t> hit_mask(static_cast<std::size_t>(w) * h, 0);
    parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
      for (std::size_t y = y0; y < y1; ++y)
        for (int x = 0; x < w; ++x) {
          LocalPoint o;
          Eigen::Vector3d dir;
          if (vs.kind == ModelKind::Affine) {
            const LocalPoint ground((x - cx) * spec.gsd, -(static_cast<double>(y) - cy) * spec.gsd,
                                    base);
            o = ground + ((top - base) / d.z()) * d;
            dir = -d;
          } else {
            const PixelCoord px{static_cast<double>(x), static_cast<double>(y)};
            dir = view.camera.ray(px);
            const LocalPoint c = view.camera.center_at(px.y);
            o = c + ((c.z() - top) / -dir.z()) * dir;
          }
          const auto hit = bvh.intersect(scene.truth_mesh, o, dir);
          const std::size_t i = view.image.index(x, static_cast<int>(y));
          if (!hit) continue;
          view.image.values()[i] = texture(hit->point);
          hit_mask[i] = 1;
        }
    });
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (!hit_mask[view.image.index(x, y)]) view.image.set_valid(x, y, false);

    const DemGrid& dem = scene.truth_dem;
    view.visible.assign(dem.heights.size(), 0);
    parallel_for(static_cast<std::size_t>(dem.rows), [&](std::size_t r0, std::size_t r1) {
      for (std::size_t r = r0; r < r1; ++r)
        for (int c = 0; c < dem.cols; ++c) {
          const int row = static_cast<int>(r);
          const Eigen::Vector2d xy = dem.cell_center(c, row);
          const LocalPoint p(xy.x(), xy.y(), dem.at(c, row));
          const Eigen::Vector3d up = view.direction_to_sensor(p);
          const LocalPoint start = p + kOcclusionEpsilon * up;
          view.visible[dem.index(c, row)] =
              bvh.occluded(scene.truth_mesh, start, up, kMinHitDistance,
                           std::numeric_limits<double>::infinity())
                  ? 0
                  : 1;
        }
    });
    view.occluded_cells =
        static_cast<std::size_t>(std::count(view.visible.begin(), view.visible.end(), 0));
    scene.views.push_back(std::move(view));
  }
  return scene;
}

TriMesh perturb_mesh(const TriMesh& mesh, double sigma, std::uint64_t seed, bool z_only) {
  if (!(sigma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma must be non-negative");
  TriMesh out = mesh;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<LocalPoint> v = mesh.vertices();
  for (LocalPoint& p : v) {
    if (z_only) {
      p.z() += noise(rng);
    } else {
      for (int k = 0; k < 3; ++k) p[k] += noise(rng);
    }
  }
  out.set_vertices(std::move(v));
  return out;
}

}  // namespace meshforge::synth
