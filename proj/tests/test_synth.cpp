#include <doctest.h>

#include <cmath>
#include <random>

#include "meshforge/error.hpp"
#include "meshforge/synth.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace meshforge;

TEST_CASE("nadir render of a flat scene is the texture on the plane") {
  synth::SceneSpec s = testing::small_scene(48);
  s.terrain.base_height = 3.0;
  s.views = {{0.0, 0.0, synth::ModelKind::Affine}, {10.0, 45.0, synth::ModelKind::Affine}};
  const synth::Scene scene = synth::generate_scene(s, 13);
  const synth::Texture tex(s.texture, s.gsd, 13 + 1);
  const Raster& img = scene.views[0].image;
  const double c = 0.5 * (48 - 1);
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 48; ++x) {
      REQUIRE(img.valid(x, y));
      const LocalPoint p((x - c) * s.gsd, -(y - c) * s.gsd, 3.0);
      CHECK(std::abs(img.at(x, y) - tex(p)) < 1e-6);
    }
}

TEST_CASE("texture stays within its contrast band") {
  const synth::TextureSpec spec;
  const synth::Texture tex(spec, 0.5, 1);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int i = 0; i < 1000; ++i) {
    const double v = tex({u(rng), u(rng), u(rng) * 0.1});
    CHECK(v >= spec.mean - spec.contrast - 1e-12);
    CHECK(v <= spec.mean + spec.contrast + 1e-12);
  }
}

TEST_CASE("occluded cell count matches an exhaustive occlusion test") {
  synth::SceneSpec s = testing::small_scene(48, 15.0);
  s.terrain.kind = synth::TerrainKind::Boxes;
  s.terrain.boxes = {{-4, -3, 4, 3, 5}, {5, 5, 3, 4, 6}};
  s.views.resize(2);
  const synth::Scene scene = synth::generate_scene(s, 2);
  const DemGrid& dem = scene.truth_dem;
  for (const auto& v : scene.views) {
    std::size_t occluded = 0;
    for (int r = 0; r < dem.rows; ++r)
      for (int c = 0; c < dem.cols; ++c) {
        const Eigen::Vector2d xy = dem.cell_center(c, r);
        const LocalPoint p(xy.x(), xy.y(), dem.at(c, r));
        const Eigen::Vector3d up = v.direction_to_sensor(p);
        const bool hidden = testing::exhaustive_intersect(scene.truth_mesh, p + kOcclusionEpsilon * up, up).has_value();
        CHECK((v.visible[dem.index(c, r)] == 0) == hidden);
        occluded += hidden ? 1 : 0;
      }
    CHECK(v.occluded_cells == occluded);
    CHECK(occluded > 0);
  }
}

TEST_CASE("scene generation is deterministic in the seed") {
  synth::SceneSpec s = testing::small_scene(32);
  s.terrain.kind = synth::TerrainKind::Fractal;
  s.terrain.hill_amplitude = 3.0;
  s.views[3].kind = synth::ModelKind::CubicPerspectiveFit;
  const synth::Scene a = synth::generate_scene(s, 5);
  const synth::Scene b = synth::generate_scene(s, 5);
  const synth::Scene c = synth::generate_scene(s, 6);
  CHECK(a.truth_dem.heights == b.truth_dem.heights);
  CHECK(a.truth_dem.heights != c.truth_dem.heights);
  for (std::size_t k = 0; k < a.views.size(); ++k) {
    CHECK(a.views[k].image == b.views[k].image);
    CHECK(a.views[k].model.num_samp == b.views[k].model.num_samp);
    CHECK(a.views[k].model.den_line == b.views[k].model.den_line);
  }
}

TEST_CASE("perspective fit reproduces the sensor within tolerance") {
  synth::SceneSpec s = testing::small_scene(64);
  const synth::Scene scene = synth::generate_scene(s, 1);
  synth::PushbroomCamera cam;
  const double t = 25.0 * 3.14159265358979323846 / 180.0;
  const Eigen::Vector3d d(0.0, -std::sin(t), std::cos(t));
  cam.axes.row(2) = -d.transpose();
  cam.axes.row(0) = Eigen::RowVector3d(1, 0, 0);
  cam.axes.row(1) = cam.axes.row(2).cross(cam.axes.row(0));
  cam.center = 600000.0 * d;
  cam.focal_px = 600000.0 / 0.5;
  cam.cx = cam.cy = 31.5;
  cam.line_step = 0.5 * std::cos(t);
  synth::FitBox box;
  box.half_x = box.half_y = 400.0;
  const auto fit = synth::fit_rfm([&](const LocalPoint& p) { return cam.project(p); }, scene.frame, box, 64, 64);
  CHECK(fit.max_residual_px < 0.01);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-350, 350), z(-600, 600);
  for (int i = 0; i < 100; ++i) {
    const LocalPoint p(u(rng), u(rng), z(rng));
    const PixelCoord a = cam.project(p);
    const PixelCoord b = rfm::project(fit.model, scene.frame.from_local(p));
    CHECK(std::hypot(a.x - b.x, a.y - b.y) < 0.01);
  }
}

TEST_CASE("an unfittable projector is reported") {
  const geo::LocalFrame f = geo::build_frame({30.0, -81.0, 0.0});
  const auto wavy = [](const LocalPoint& p) { return PixelCoord{std::sin(p.x() * 0.1) * 100.0, p.y()}; };
  try {
    synth::fit_rfm(wavy, f, synth::FitBox{}, 64, 64);
    FAIL("expected FitResidualTooLarge");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::FitResidualTooLarge);
  }
}

TEST_CASE("mesh perturbation statistics") {
  DemGrid dem(0.0, 0.0, 1.0, 100, 100, 0.0);
  const TriMesh m = mesh_from_dem(dem, 1);
  REQUIRE(m.vertex_count() == 10000);

  const TriMesh same = synth::perturb_mesh(m, 0.0, 1);
  CHECK(same.vertices() == m.vertices());

  const TriMesh p = synth::perturb_mesh(m, 1.0, 77);
  double sum = 0.0, sum_sq = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < m.vertex_count(); ++i)
    for (int k = 0; k < 3; ++k) {
      const double d = p.vertices()[i][k] - m.vertices()[i][k];
      sum += d;
      sum_sq += d * d;
      ++n;
    }
  const double mean = sum / n;
  const double sd = std::sqrt(sum_sq / n - mean * mean);
  CHECK(sd >= 0.97);
  CHECK(sd <= 1.03);
  CHECK(synth::perturb_mesh(m, 1.0, 77).vertices() == p.vertices());
  CHECK(synth::perturb_mesh(m, 1.0, 78).vertices() != p.vertices());

  const TriMesh zonly = synth::perturb_mesh(m, 1.0, 77, true);
  for (std::size_t i = 0; i < m.vertex_count(); ++i) {
    CHECK(zonly.vertices()[i].x() == m.vertices()[i].x());
    CHECK(zonly.vertices()[i].y() == m.vertices()[i].y());
  }
  CHECK_THROWS_AS(synth::perturb_mesh(m, -1.0, 1), Error);
}

TEST_CASE("scene spec validation") {
  synth::SceneSpec s = testing::small_scene(32);
  s.views.resize(1);
  CHECK_THROWS_AS(s.validate(), Error);
  s = testing::small_scene(32);
  s.gsd = 0.0;
  CHECK_THROWS_AS(s.validate(), Error);
}
