#include "meshforge/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>

#include "meshforge/config.hpp"
#include "meshforge/error.hpp"
#include "meshforge/eval.hpp"
#include "meshforge/geoframe.hpp"
#include "meshforge/io.hpp"
#include "meshforge/mesh.hpp"
#include "meshforge/raycast.hpp"
#include "meshforge/refine.hpp"
#include "meshforge/synth.hpp"

namespace meshforge::cli {

namespace {

std::string num(double v, const char* format = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorKind::Io, dir.string() + ": cannot create directory");
}

std::ofstream open_text(const fs::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, path.string() + ": cannot open for writing");
  return f;
}

void write_text(const fs::path& path, const std::string& text) {
  auto f = open_text(path);
  f << text;
  if (!f) throw Error(ErrorKind::Io, path.string() + ": write failed");
}

GeoPoint anchor_from(const rfm::Model& m) { return {m.lat_off, m.lon_off, m.height_off}; }

eval::MetricsReport evaluate(const DemGrid& test, const DemGrid& truth, const DemGrid* mask,
                             double truncation, bool align) {
  if (!align) return eval::compute_metrics(test, truth, mask, truncation);
  const eval::Alignment a = eval::align_vertical(test, truth);
  eval::MetricsReport r = eval::compute_metrics(a.aligned, truth, mask, truncation);
  r.vertical_offset_applied_m = a.offset_m;
  return r;
}

}  // namespace

int run_command(const std::function<void()>& body, std::ostream& err) {
  try {
    body();
    return kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    switch (classify(e.kind())) {
      case ErrorClass::Config: return kConfigError;
      case ErrorClass::Io: return kIoError;
      case ErrorClass::Numerical: return kNumericalError;
    }
    return kFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

void cmd_synth(const fs::path& scene_config, const fs::path& out_dir,
               std::optional<std::uint64_t> seed, std::ostream& out) {
  config::SceneConfig sc = config::load_scene(scene_config);
  if (seed) sc.seed = *seed;
  const synth::Scene scene = synth::generate_scene(sc.spec, sc.seed);
  make_dir(out_dir);

  config::ProjectConfig project;
  project.anchor = sc.spec.anchor;
  project.refine = sc.refine;
  std::string occlusion = "view,occluded_cells\n";
  for (std::size_t k = 0; k < scene.views.size(); ++k) {
    const auto& v = scene.views[k];
    const fs::path image = out_dir / ("view_" + std::to_string(k) + ".pgm");
    const fs::path rpc = out_dir / ("view_" + std::to_string(k) + ".rpc");
    io::write_pgm16(image, v.image);
    io::write_rpc(rpc, v.model);
    project.views.push_back({image, rpc, 0.0, 0.0});
    occlusion += std::to_string(k) + "," + std::to_string(v.occluded_cells) + "\n";
  }

  std::vector<LocalPoint> verts = scene.truth_mesh.vertices();
  const config::InitialSurface& init = sc.initial;
  if (init.block_offset != 0.0)
    for (LocalPoint& p : verts)
      if (std::abs(p.x() - init.block_center_x) < init.block_half_x &&
          std::abs(p.y() - init.block_center_y) < init.block_half_y)
        p.z() += init.block_offset;
  TriMesh start = scene.truth_mesh;
  start.set_vertices(std::move(verts));
  start = synth::perturb_mesh(start, init.sigma, init.seed, init.z_only);

  DemGrid mask = scene.truth_dem.empty_like();
  const double gsd = sc.spec.gsd;
  const double hx = 0.5 * sc.spec.image_width * gsd - sc.mask_margin_px * gsd;
  const double hy = 0.5 * sc.spec.image_height * gsd - sc.mask_margin_px * gsd;
  for (int r = 0; r < mask.rows; ++r)
    for (int c = 0; c < mask.cols; ++c) {
      const Eigen::Vector2d p = mask.cell_center(c, r);
      if (std::abs(p.x()) < hx && std::abs(p.y()) < hy) mask.at(c, r) = 1.0;
    }

  project.initial_mesh = out_dir / "initial.ply";
  project.grid = project.truth_dem = out_dir / "truth_dem.asc";
  project.mask = out_dir / "mask.asc";
  project.output_dir = out_dir / "refined";
  io::write_ply(out_dir / "truth.ply", scene.truth_mesh);
  io::write_ply(*project.initial_mesh, start);
  io::write_esri_ascii(*project.truth_dem, scene.truth_dem);
  io::write_esri_ascii(*project.mask, mask);
  write_text(out_dir / "occlusion.csv", occlusion);
  write_text(out_dir / "project.json", config::project_to_json(project, out_dir));

  out << "scene written to " << out_dir.string() << ": " << scene.views.size() << " views, "
      << scene.truth_mesh.vertex_count() << " truth vertices, seed " << sc.seed << '\n';
}

void cmd_validate(const ValidateOptions& opts, std::ostream& out) {
  if (opts.rpcs.empty()) throw Error(ErrorKind::Config, "validate needs at least one RPC file");
  std::vector<rfm::Model> models;
  for (const auto& p : opts.rpcs) models.push_back(io::read_rpc(p));
  const GeoPoint anchor = opts.anchor.value_or(anchor_from(models.front()));
  const geo::LocalFrame frame = geo::build_frame(anchor);

  const std::vector<double> scales = {100, 200, 500, 1000, 2000, 5000};
  const auto rows = geo::validate_frame(frame, scales, opts.terrain_height.value_or(anchor.height));
  out << "Local frame approximation at lat " << num(anchor.lat, "%.6f") << ", lon "
      << num(anchor.lon, "%.6f") << "\n";
  out << "   scale s [m]   |x'| [m]      |y'| [m]      angle [deg]\n";
  std::string frame_csv = "scale_m,length_x_m,length_y_m,angle_deg\n";
  for (const auto& r : rows) {
    out << num(r.scale, "%12.0f") << "  " << num(r.length_x, "%12.4f") << "  "
        << num(r.length_y, "%12.4f") << "  " << num(r.angle_deg, "%12.5f") << '\n';
    frame_csv += num(r.scale) + "," + num(r.length_x) + "," + num(r.length_y) + "," + num(r.angle_deg) + "\n";
  }

  const std::vector<double> heights = {1, 100, 500, 1000};
  out << "\nVirtual ray off-nadir angle [deg] at the image center\n";
  out << "   model        h=1          h=100        h=500        h=1000       variation\n";
  std::string ray_csv = "model,h1_deg,h100_deg,h500_deg,h1000_deg,variation_deg\n";
  for (std::size_t k = 0; k < models.size(); ++k) {
    const rfm::Model& m = models[k];
    const PixelCoord center{m.samp_off, m.line_off};
    const auto s = validate_ray_straightness(m, frame, center, heights);
    double lo = s.front().off_nadir_deg, hi = lo;
    out << num(static_cast<double>(k), "%8.0f");
    ray_csv += opts.rpcs[k].filename().string();
    for (const auto& row : s) {
      lo = std::min(lo, row.off_nadir_deg);
      hi = std::max(hi, row.off_nadir_deg);
      out << "  " << num(row.off_nadir_deg, "%11.6f");
      ray_csv += "," + num(row.off_nadir_deg);
    }
    out << "  " << num(hi - lo, "%11.3e") << '\n';
    ray_csv += "," + num(hi - lo) + "\n";
  }

  if (opts.csv_dir) {
    make_dir(*opts.csv_dir);
    write_text(*opts.csv_dir / "frame.csv", frame_csv);
    write_text(*opts.csv_dir / "straightness.csv", ray_csv);
  }
}

void cmd_mesh_from_dem(const fs::path& dem, int decimation, const fs::path& out_mesh, std::ostream& out) {
  const TriMesh mesh = mesh_from_dem(io::read_esri_ascii(dem), decimation);
  io::write_ply(out_mesh, mesh);
  out << "mesh with " << mesh.vertex_count() << " vertices and " << mesh.face_count()
      << " faces written to " << out_mesh.string() << '\n';
}

void cmd_dem_from_mesh(const fs::path& mesh_path, const std::optional<fs::path>& grid,
                       std::optional<double> cell_size, const fs::path& out_dem, std::ostream& out) {
  const TriMesh mesh = io::read_ply(mesh_path);
  DemGrid layout;
  if (grid) {
    layout = io::read_esri_ascii(*grid).empty_like();
  } else {
    if (!cell_size || !(*cell_size > 0.0))
      throw Error(ErrorKind::Config, "dem-from-mesh needs --grid or a positive --cell-size");
    Eigen::AlignedBox3d box;
    for (const auto& v : mesh.vertices()) box.extend(v);
    const double cs = *cell_size;
    const int cols = std::max(1, static_cast<int>(std::floor(box.sizes().x() / cs)) + 1);
    const int rows = std::max(1, static_cast<int>(std::floor(box.sizes().y() / cs)) + 1);
    layout = DemGrid(box.min().x(), box.min().y(), cs, cols, rows);
  }
  const DemGrid dem = dem_from_mesh(mesh, layout);
  io::write_esri_ascii(out_dem, dem);
  out << dem.cols << "x" << dem.rows << " DEM with " << dem.valid_count() << " valid cells written to "
      << out_dem.string() << '\n';
}

void cmd_evaluate(const EvaluateOptions& opts, std::ostream& out) {
  const DemGrid test = io::read_esri_ascii(opts.test);
  const DemGrid truth = io::read_esri_ascii(opts.truth);
  std::optional<DemGrid> mask;
  if (opts.mask) mask = io::read_esri_ascii(*opts.mask);
  const eval::MetricsReport r =
      evaluate(test, truth, mask ? &*mask : nullptr, opts.truncation_m, opts.align);
  const std::string json = io::metrics_json(r);
  out << json << '\n';
  if (opts.json_out) write_text(*opts.json_out, json + "\n");
  if (opts.residual_out) {
    DemGrid aligned = test;
    for (double& h : aligned.heights) h -= r.vertical_offset_applied_m;
    io::write_esri_ascii(*opts.residual_out, eval::residual_grid(aligned, truth));
  }
}

void cmd_refine(const fs::path& config_path, bool dry_run, std::ostream& out) {
  const config::ProjectConfig cfg = config::load_project(config_path);
  config::validate_project(cfg);
  if (dry_run) {
    out << "configuration valid: " << cfg.views.size() << " views, output to "
        << cfg.output_dir.string() << '\n';
    return;
  }

  std::vector<refine::View> views;
  for (const auto& v : cfg.views) {
    rfm::Model m = io::read_rpc(v.rpc);
    m.shift_samp = v.shift_samp;
    m.shift_line = v.shift_line;
    views.push_back({m, io::read_image(v.image)});
  }
  const geo::LocalFrame frame =
      geo::build_frame(cfg.anchor.value_or(anchor_from(views.front().model)));

  std::optional<DemGrid> initial_dem;
  if (cfg.initial_dem) initial_dem = io::read_esri_ascii(*cfg.initial_dem);
  DemGrid layout;
  if (cfg.grid) layout = io::read_esri_ascii(*cfg.grid).empty_like();
  else if (initial_dem) layout = initial_dem->empty_like();
  else layout = io::read_esri_ascii(*cfg.truth_dem).empty_like();

  const refine::RefineResult result =
      initial_dem ? refine::refine_hierarchical(*initial_dem, views, frame, cfg.refine)
                  : refine::refine_hierarchical(io::read_ply(*cfg.initial_mesh), layout, views,
                                                frame, cfg.refine);
  const DemGrid dem = dem_from_mesh(result.mesh, layout);

  make_dir(cfg.output_dir);
  io::write_ply(cfg.output_dir / "refined.ply", result.mesh);
  io::write_esri_ascii(cfg.output_dir / "refined_dem.asc", dem);
  std::string csv = "level,iteration,photo,smooth,total\n";
  for (const auto& e : result.log)
    csv += std::to_string(e.level) + "," + std::to_string(e.iteration) + "," + num(e.photo) + "," +
           num(e.smooth) + "," + num(e.total) + "\n";
  write_text(cfg.output_dir / "energy.csv", csv);

  out << "refined " << result.mesh.vertex_count() << " vertices using " << result.pairs.size()
      << " view pairs; outputs in " << cfg.output_dir.string() << '\n';
  if (cfg.truth_dem) {
    const DemGrid truth = io::read_esri_ascii(*cfg.truth_dem);
    std::optional<DemGrid> mask;
    if (cfg.mask) mask = io::read_esri_ascii(*cfg.mask);
    const eval::MetricsReport r = evaluate(dem, truth, mask ? &*mask : nullptr, cfg.truncation_m, true);
    const std::string json = io::metrics_json(r);
    write_text(cfg.output_dir / "metrics.json", json + "\n");
    out << json << '\n';
  }
}

}  // namespace meshforge::cli
