#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "meshforge/error.hpp"
#include "meshforge/imaging.hpp"
#include "meshforge/raycast.hpp"
#include "meshforge/synth.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace meshforge;

namespace {

TriMesh flat_mesh(double z, double half = 10.0) {
  return TriMesh({{-half, -half, z}, {half, -half, z}, {half, half, z}, {-half, half, z}},
                 {Face{0, 1, 2}, Face{0, 2, 3}});
}

synth::Scene two_view_scene(synth::TerrainSpec terrain, double off_nadir, int size = 64,
                            synth::ModelKind kind = synth::ModelKind::Affine) {
  synth::SceneSpec s = testing::small_scene(size);
  s.views = {{0.0, 0.0, synth::ModelKind::Affine}, {off_nadir, 90.0, kind}};
  s.terrain = std::move(terrain);
  return synth::generate_scene(s, 7);
}

VirtualCamera camera_of(const synth::Scene& scene, std::size_t k) {
  return build_virtual_camera(scene.views[k].model, scene.frame, scene.views[k].image, 500.0, 100.0);
}

double angle_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b)) * 180.0 / std::numbers::pi;
}

}  // namespace

TEST_CASE("vertical ray onto a flat mesh") {
  const TriMesh m = flat_mesh(0.0);
  const Bvh bvh(m);
  const auto hit = bvh.intersect(m, {0.3, 0.2, 100.0}, {0.0, 0.0, -1.0});
  REQUIRE(hit);
  CHECK(hit->t == doctest::Approx(100.0));
  CHECK((hit->point - LocalPoint(0.3, 0.2, 0.0)).norm() < 1e-12);
  CHECK_FALSE(bvh.intersect(m, {0.3, 0.2, 100.0}, {0.0, 0.0, 1.0}));
  CHECK_FALSE(bvh.intersect(m, {30.0, 0.0, 100.0}, {0.0, 0.0, -1.0}));
}

TEST_CASE("barycentric weights of a hit") {
  const TriMesh m({{0, 0, 1}, {4, 0, 2}, {0, 2, 3}}, {Face{0, 1, 2}});
  // point with weights (0.2, 0.5, 0.3)
  const LocalPoint p = 0.2 * m.vertices()[0] + 0.5 * m.vertices()[1] + 0.3 * m.vertices()[2];
  const Eigen::Vector3d dir = Eigen::Vector3d(0.1, -0.2, -1.0).normalized();
  const auto hit = intersect_triangle(m, 0, p - 7.0 * dir, dir);
  REQUIRE(hit);
  CHECK((hit->bary - Eigen::Vector3d(0.2, 0.5, 0.3)).norm() < 1e-12);
  CHECK(hit->t == doctest::Approx(7.0));
}

TEST_CASE("BVH traversal equals the exhaustive test") {
  std::mt19937_64 rng(21);
  DemGrid dem(-10.0, -10.0, 1.0, 21, 21);
  std::normal_distribution<double> g(0.0, 2.0);
  for (double& h : dem.heights) h = g(rng);
  const TriMesh m = mesh_from_dem(dem, 1);
  const Bvh bvh(m);
  std::uniform_real_distribution<double> u(-12.0, 12.0), t(-0.6, 0.6);
  for (int i = 0; i < 2000; ++i) {
    const LocalPoint o(u(rng), u(rng), 20.0);
    const Eigen::Vector3d d = Eigen::Vector3d(t(rng), t(rng), -1.0).normalized();
    const auto a = bvh.intersect(m, o, d);
    const auto b = testing::exhaustive_intersect(m, o, d);
    REQUIRE(a.has_value() == b.has_value());
    if (!a) continue;
    CHECK(std::abs(a->t - b->t) < 1e-9);
    if (std::abs(a->t - b->t) > 1e-12) CHECK(a->face == b->face);
  }
}

TEST_CASE("affine virtual camera rays reproject to their pixel") {
  const synth::Scene scene = two_view_scene({}, 15.0);
  for (std::size_t k = 0; k < 2; ++k) {
    const VirtualCamera cam = camera_of(scene, k);
    const rfm::Model& m = scene.views[k].model;
    for (int y = 0; y < cam.height; y += 7)
      for (int x = 0; x < cam.width; x += 7) {
        const std::size_t i = cam.index(x, y);
        REQUIRE(cam.ray_valid[i]);
        const Eigen::Vector3d& d = cam.direction[i];
        CHECK(std::abs(d.norm() - 1.0) < 1e-12);
        CHECK(d.z() < 0.0);
        const LocalPoint lo = cam.origin[i];
        const LocalPoint hi = lo - (cam.delta_h / -d.z()) * d;
        for (const LocalPoint& p : {lo, hi}) {
          const PixelCoord px = rfm::project(m, scene.frame.from_local(p));
          CHECK(std::abs(px.x - x) < 1e-6);
          CHECK(std::abs(px.y - y) < 1e-6);
        }
        if (k == 0) CHECK((d - Eigen::Vector3d(0, 0, -1)).norm() < 1e-9);
      }
  }
}

TEST_CASE("virtual rays of a fitted perspective model follow the sensor rays") {
  const synth::Scene scene = two_view_scene({}, 20.0, 64, synth::ModelKind::CubicPerspectiveFit);
  const VirtualCamera cam = camera_of(scene, 1);
  const synth::PushbroomCamera& sensor = scene.views[1].camera;
  double worst = 0.0;
  for (int y = 0; y < cam.height; y += 9)
    for (int x = 0; x < cam.width; x += 9) {
      const auto d = cam.direction_at({double(x), double(y)});
      REQUIRE(d);
      worst = std::max(worst, angle_deg(*d, sensor.ray({double(x), double(y)})));
    }
  CHECK(worst < 0.01);
}

TEST_CASE("ray straightness") {
  const synth::Scene affine = two_view_scene({}, 15.0);
  const geo::LocalFrame& f = affine.frame;
  const std::vector<double> heights = {1, 100, 500, 1000};
  const auto rows = validate_ray_straightness(affine.views[1].model, f, {31.5, 31.5}, heights);
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) {
    CHECK(std::abs(r.off_nadir_deg - rows[0].off_nadir_deg) < 1e-9);
    CHECK(r.off_nadir_deg == doctest::Approx(15.0).epsilon(1e-9));
  }
  CHECK(validate_ray_straightness(affine.views[1].model, f, {31.5, 31.5}, {250.0}).size() == 1);

  const synth::Scene persp = two_view_scene({}, 30.0, 64, synth::ModelKind::CubicPerspectiveFit);
  const auto prow = validate_ray_straightness(persp.views[1].model, f, {31.5, 31.5}, heights);
  double lo = 90, hi = 0;
  for (const auto& r : prow) {
    lo = std::min(lo, r.off_nadir_deg);
    hi = std::max(hi, r.off_nadir_deg);
  }
  CHECK(hi - lo < 0.02);
  CHECK(prow[0].off_nadir_deg == doctest::Approx(30.0).epsilon(0.01));
}

TEST_CASE("visibility under a nadir camera") {
  const synth::Scene scene = two_view_scene({}, 15.0);
  const VirtualCamera cam = camera_of(scene, 0);
  const TriMesh flat = flat_mesh(0.0, 20.0);
  const Bvh bvh(flat);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-12.0, 12.0);
  for (int i = 0; i < 200; ++i) CHECK(visibility(bvh, flat, {u(rng), u(rng), 0.0}, cam));

  std::vector<LocalPoint> v = flat.vertices();
  const auto b = static_cast<std::uint32_t>(v.size());
  v.insert(v.end(), {{-2, -2, 5}, {2, -2, 5}, {2, 2, 5}, {-2, 2, 5}});
  std::vector<Face> f = flat.faces();
  f.push_back({b, b + 1, b + 2});
  f.push_back({b, b + 2, b + 3});
  const TriMesh roofed(v, f);
  const Bvh rb(roofed);
  CHECK_FALSE(visibility(rb, roofed, {0.0, 0.0, 0.0}, cam));
  CHECK(visibility(rb, roofed, {5.0, 5.0, 0.0}, cam));
}

TEST_CASE("visibility agrees with an exhaustive occlusion test on a city scene") {
  synth::TerrainSpec t;
  t.kind = synth::TerrainKind::Boxes;
  t.boxes = {{-6, -4, 4, 3, 6}, {6, 5, 3, 5, 8}, {0, 9, 5, 2, 4}};
  const synth::Scene scene = two_view_scene(t, 20.0);
  const VirtualCamera cam = camera_of(scene, 1);
  const TriMesh& m = scene.truth_mesh;
  const Bvh bvh(m);
  std::mt19937_64 rng(5);
  // cells inside the 32 m image footprint
  std::uniform_int_distribution<int> cell(scene.truth_dem.cols / 2 - 26, scene.truth_dem.cols / 2 + 25);
  int occluded = 0;
  for (int i = 0; i < 1000; ++i) {
    const int c = cell(rng), r = cell(rng);
    const Eigen::Vector2d xy = scene.truth_dem.cell_center(c, r);
    const LocalPoint p(xy.x(), xy.y(), scene.truth_dem.at(c, r));
    const auto d = cam.direction_at(rfm::project(cam.model, scene.frame.from_local(p)));
    REQUIRE(d);
    const Eigen::Vector3d up = -*d;
    const LocalPoint start = p + kOcclusionEpsilon * up;
    const double t_max = (cam.plane_h - start.z()) / up.z();
    const bool expect = !testing::exhaustive_intersect(m, start, up, kMinHitDistance, t_max);
    CHECK(visibility(bvh, m, p, cam) == expect);
    occluded += expect ? 0 : 1;
  }
  CHECK(occluded > 20);
}

TEST_CASE("reprojection into the same view reproduces the image") {
  const synth::Scene scene = two_view_scene({}, 15.0);
  const VirtualCamera cam = camera_of(scene, 1);
  const Bvh bvh(scene.truth_mesh);
  const Reprojection rp = reproject(bvh, scene.truth_mesh, cam, cam);
  int valid = 0;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      if (!rp.ok[cam.index(x, y)]) continue;
      ++valid;
      CHECK(std::abs(rp.image.at(x, y) - cam.intensities.at(x, y)) < 1e-6);
    }
  CHECK(valid > cam.width * cam.height * 9 / 10);
}

TEST_CASE("reprojection through the true surface correlates perfectly") {
  const synth::Scene scene = two_view_scene({}, 15.0);
  const VirtualCamera ci = camera_of(scene, 0), cj = camera_of(scene, 1);
  const Bvh bvh(scene.truth_mesh);
  const Reprojection rp = reproject(bvh, scene.truth_mesh, ci, cj);
  const SimilarityField f = zncc_field(ci.intensities, rp.image, 7);
  double sum = 0.0;
  int n = 0;
  for (int y = 8; y < ci.height - 8; ++y)
    for (int x = 8; x < ci.width - 8; ++x)
      if (f.score.valid(x, y)) {
        sum += f.score.at(x, y);
        ++n;
      }
  REQUIRE(n > 1000);
  CHECK(sum / n < -0.99);
}

TEST_CASE("raising the surface shifts the transfer by the parallax") {
  const double phi = 15.0;
  const synth::Scene scene = two_view_scene({}, phi);
  const VirtualCamera ci = camera_of(scene, 0), cj = camera_of(scene, 1);
  const TriMesh& m = scene.truth_mesh;
  std::vector<LocalPoint> raised_v = m.vertices();
  for (auto& v : raised_v) v.z() += 1.0;
  const TriMesh raised(raised_v, m.faces());
  const Reprojection a = reproject(Bvh(m), m, ci, cj);
  const Reprojection b = reproject(Bvh(raised), raised, ci, cj);
  const double expected = std::tan(phi * std::numbers::pi / 180.0) * 1.0 / 0.5;
  int n = 0;
  for (std::size_t i = 0; i < a.hits.size(); ++i) {
    if (!a.ok[i] || !b.ok[i]) continue;
    const double shift = std::hypot(b.hits[i].target.x - a.hits[i].target.x, b.hits[i].target.y - a.hits[i].target.y);
    CHECK(shift == doctest::Approx(expected).epsilon(1e-6));
    ++n;
  }
  CHECK(n > 1000);
}

TEST_CASE("inverse projection lands on the requested height") {
  const synth::Scene scene = two_view_scene({}, 15.0);
  const auto p = inverse_project(scene.views[1].model, scene.frame, {20.0, 30.0}, 42.0);
  REQUIRE(p);
  CHECK(p->z() == 42.0);
  const PixelCoord back = rfm::project(scene.views[1].model, scene.frame.from_local(*p));
  CHECK(std::abs(back.x - 20.0) < 1e-6);
  CHECK(std::abs(back.y - 30.0) < 1e-6);
}
