#include "meshforge/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "meshforge/error.hpp"

namespace meshforge::config {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::Config, where + ": " + what);
}

// Object accessor that remembers which keys were read so leftovers can be
// reported as typos.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) bad(where_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  T get(const std::string& key, const T& fallback) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    return as<T>(key);
  }

  template <typename T>
  T require(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) bad(where_, "missing key '" + key + "'");
    return as<T>(key);
  }

  const json& child(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!used_.count(key)) bad(where_, "unknown key '" + key + "'");
  }

 private:
  template <typename T>
  T as(const std::string& key) const {
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      bad(where_, "wrong type for '" + key + "'");
    }
  }

  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

json parse_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, path.string() + ": cannot open for reading");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    bad(path.string(), std::string("invalid JSON: ") + e.what());
  }
}

GeoPoint read_geo(const json& j, const std::string& where) {
  Reader r(j, where);
  GeoPoint g{r.require<double>("lat"), r.require<double>("lon"), r.get<double>("height", 0.0)};
  r.finish();
  return g;
}

json geo_to_json(const GeoPoint& g) { return {{"lat", g.lat}, {"lon", g.lon}, {"height", g.height}}; }

refine::RefineConfig read_refine(const json& j, const std::string& where) {
  Reader r(j, where);
  refine::RefineConfig c;
  c.alpha = r.get("alpha", c.alpha);
  c.beta_smooth = r.get("beta_smooth", c.beta_smooth);
  if (r.has("beta_scale")) c.beta_scale = r.get("beta_scale", 0.0);
  c.step_size = r.get("step_size", c.step_size);
  c.iterations_per_level = r.get("iterations_per_level", c.iterations_per_level);
  c.start_level = r.get("start_level", c.start_level);
  if (r.has("pairs")) {
    const auto pairs = r.get<std::vector<std::vector<std::size_t>>>("pairs", {});
    for (const auto& p : pairs) {
      if (p.size() != 2) bad(r.path("pairs"), "each pair needs two view indices");
      c.pairs.emplace_back(p[0], p[1]);
    }
  }
  c.min_angle_deg = r.get("min_angle_deg", c.min_angle_deg);
  c.max_angle_deg = r.get("max_angle_deg", c.max_angle_deg);
  c.zncc_window = r.get("zncc_window", c.zncc_window);
  c.plane_offset = r.get("plane_offset", c.plane_offset);
  c.delta_h = r.get("delta_h", c.delta_h);
  c.pixels_per_triangle = r.get("pixels_per_triangle", c.pixels_per_triangle);
  r.finish();
  return c;
}

json refine_to_json(const refine::RefineConfig& c) {
  json j = {{"alpha", c.alpha},
            {"beta_smooth", c.beta_smooth},
            {"step_size", c.step_size},
            {"iterations_per_level", c.iterations_per_level},
            {"start_level", c.start_level},
            {"min_angle_deg", c.min_angle_deg},
            {"max_angle_deg", c.max_angle_deg},
            {"zncc_window", c.zncc_window},
            {"plane_offset", c.plane_offset},
            {"delta_h", c.delta_h},
            {"pixels_per_triangle", c.pixels_per_triangle}};
  if (c.beta_scale) j["beta_scale"] = *c.beta_scale;
  if (!c.pairs.empty()) {
    json pairs = json::array();
    for (const auto& [a, b] : c.pairs) pairs.push_back({a, b});
    j["pairs"] = pairs;
  }
  return j;
}

}  // namespace

ProjectConfig load_project(const fs::path& path) {
  const json j = parse_file(path);
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

  Reader r(j, path.filename().string());
  ProjectConfig cfg;
  if (r.has("anchor")) cfg.anchor = read_geo(r.child("anchor"), r.path("anchor"));
  if (!r.has("views")) bad(r.path("views"), "missing");
  const json& views = r.child("views");
  if (!views.is_array()) bad(r.path("views"), "expected an array");
  for (std::size_t i = 0; i < views.size(); ++i) {
    Reader v(views[i], r.path("views[" + std::to_string(i) + "]"));
    ViewInput in;
    in.image = resolve(v.require<std::string>("image"));
    in.rpc = resolve(v.require<std::string>("rpc"));
    in.shift_samp = v.get("shift_samp", 0.0);
    in.shift_line = v.get("shift_line", 0.0);
    v.finish();
    cfg.views.push_back(in);
  }
  auto optional_path = [&](const char* key) -> std::optional<fs::path> {
    if (!r.has(key)) return std::nullopt;
    return resolve(r.require<std::string>(key));
  };
  cfg.initial_dem = optional_path("initial_dem");
  cfg.initial_mesh = optional_path("initial_mesh");
  cfg.grid = optional_path("grid");
  cfg.truth_dem = optional_path("truth_dem");
  cfg.mask = optional_path("mask");
  cfg.output_dir = resolve(r.get<std::string>("output_dir", "refined"));
  cfg.truncation_m = r.get("truncation_m", cfg.truncation_m);
  if (r.has("refine")) cfg.refine = read_refine(r.child("refine"), r.path("refine"));
  r.finish();
  return cfg;
}

void validate_project(const ProjectConfig& cfg) {
  if (cfg.views.size() < 2) throw Error(ErrorKind::Config, "at least two views are required");
  if (cfg.initial_dem.has_value() == cfg.initial_mesh.has_value())
    throw Error(ErrorKind::Config, "exactly one of initial_dem and initial_mesh must be given");
  if (cfg.initial_mesh && !cfg.grid && !cfg.truth_dem)
    throw Error(ErrorKind::Config, "a mesh input needs 'grid' or 'truth_dem' for the output DEM layout");
  if (!(cfg.truncation_m > 0.0)) throw Error(ErrorKind::Config, "truncation_m must be positive");
  for (const auto& [a, b] : cfg.refine.pairs)
    if (a >= cfg.views.size() || b >= cfg.views.size() || a == b)
      throw Error(ErrorKind::Config, "pair (" + std::to_string(a) + ", " + std::to_string(b) +
                                         ") does not name two distinct views");
  cfg.refine.validate();

  auto must_exist = [](const fs::path& p) {
    if (!fs::is_regular_file(p)) throw Error(ErrorKind::Io, p.string() + ": no such file");
  };
  for (const auto& v : cfg.views) {
    must_exist(v.image);
    must_exist(v.rpc);
  }
  for (const auto* p : {&cfg.initial_dem, &cfg.initial_mesh, &cfg.grid, &cfg.truth_dem, &cfg.mask})
    if (*p) must_exist(**p);
  if (fs::exists(cfg.output_dir)) {
    if (!fs::is_directory(cfg.output_dir))
      throw Error(ErrorKind::Io, cfg.output_dir.string() + ": exists and is not a directory");
  } else {
    fs::path parent = cfg.output_dir.parent_path();
    if (parent.empty()) parent = ".";
    if (!fs::is_directory(parent))
      throw Error(ErrorKind::Io, parent.string() + ": output parent directory does not exist");
  }
}

std::string project_to_json(const ProjectConfig& cfg, const fs::path& relative_to) {
  auto rel = [&](const fs::path& p) { return p.lexically_relative(relative_to).generic_string(); };
  json j;
  if (cfg.anchor) j["anchor"] = geo_to_json(*cfg.anchor);
  j["views"] = json::array();
  for (const auto& v : cfg.views)
    j["views"].push_back({{"image", rel(v.image)},
                          {"rpc", rel(v.rpc)},
                          {"shift_samp", v.shift_samp},
                          {"shift_line", v.shift_line}});
  if (cfg.initial_dem) j["initial_dem"] = rel(*cfg.initial_dem);
  if (cfg.initial_mesh) j["initial_mesh"] = rel(*cfg.initial_mesh);
  if (cfg.grid) j["grid"] = rel(*cfg.grid);
  if (cfg.truth_dem) j["truth_dem"] = rel(*cfg.truth_dem);
  if (cfg.mask) j["mask"] = rel(*cfg.mask);
  j["output_dir"] = rel(cfg.output_dir);
  j["truncation_m"] = cfg.truncation_m;
  j["refine"] = refine_to_json(cfg.refine);
  return j.dump(2) + "\n";
}

namespace {

synth::TerrainSpec read_terrain(const json& j, const std::string& where) {
  Reader r(j, where);
  synth::TerrainSpec t;
  const auto kind = r.get<std::string>("kind", "flat");
  if (kind == "flat") t.kind = synth::TerrainKind::Flat;
  else if (kind == "ramp") t.kind = synth::TerrainKind::Ramp;
  else if (kind == "boxes") t.kind = synth::TerrainKind::Boxes;
  else if (kind == "fractal") t.kind = synth::TerrainKind::Fractal;
  else bad(r.path("kind"), "unknown terrain kind '" + kind + "'");
  t.base_height = r.get("base_height", t.base_height);
  t.slope_x = r.get("slope_x", t.slope_x);
  t.slope_y = r.get("slope_y", t.slope_y);
  t.hill_amplitude = r.get("hill_amplitude", t.hill_amplitude);
  t.hill_wavelength = r.get("hill_wavelength", t.hill_wavelength);
  t.hill_octaves = r.get("hill_octaves", t.hill_octaves);
  if (r.has("boxes")) {
    const json& boxes = r.child("boxes");
    if (!boxes.is_array()) bad(r.path("boxes"), "expected an array");
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      Reader b(boxes[i], r.path("boxes[" + std::to_string(i) + "]"));
      const auto c = b.require<std::array<double, 2>>("center");
      const auto h = b.require<std::array<double, 2>>("half_size");
      t.boxes.push_back({c[0], c[1], h[0], h[1], b.require<double>("height")});
      b.finish();
    }
  }
  r.finish();
  return t;
}

synth::TextureSpec read_texture(const json& j, const std::string& where) {
  Reader r(j, where);
  synth::TextureSpec t;
  t.mean = r.get("mean", t.mean);
  t.contrast = r.get("contrast", t.contrast);
  t.min_wavelength_px = r.get("min_wavelength_px", t.min_wavelength_px);
  t.octaves = r.get("octaves", t.octaves);
  t.components_per_octave = r.get("components_per_octave", t.components_per_octave);
  r.finish();
  return t;
}

InitialSurface read_initial(const json& j, const std::string& where) {
  Reader r(j, where);
  InitialSurface s;
  s.sigma = r.get("sigma", s.sigma);
  s.z_only = r.get("z_only", s.z_only);
  s.seed = r.get("seed", s.seed);
  if (r.has("block")) {
    Reader b(r.child("block"), r.path("block"));
    const auto c = b.require<std::array<double, 2>>("center");
    const auto h = b.require<std::array<double, 2>>("half_size");
    s.block_center_x = c[0];
    s.block_center_y = c[1];
    s.block_half_x = h[0];
    s.block_half_y = h[1];
    s.block_offset = b.require<double>("offset");
    b.finish();
  }
  r.finish();
  if (!(s.sigma >= 0.0)) bad(where, "sigma must be non-negative");
  return s;
}

}  // namespace

SceneConfig load_scene(const fs::path& path) {
  const json j = parse_file(path);
  Reader r(j, path.filename().string());
  SceneConfig cfg;
  synth::SceneSpec& s = cfg.spec;
  cfg.seed = r.get("seed", cfg.seed);
  if (r.has("anchor")) s.anchor = read_geo(r.child("anchor"), r.path("anchor"));
  s.extent = r.get("extent", s.extent);
  s.gsd = r.get("gsd", s.gsd);
  s.image_width = r.get("image_width", s.image_width);
  s.image_height = r.get("image_height", s.image_height);
  s.model_height_scale = r.get("model_height_scale", s.model_height_scale);
  s.sensor_range = r.get("sensor_range", s.sensor_range);
  if (r.has("terrain")) s.terrain = read_terrain(r.child("terrain"), r.path("terrain"));
  if (r.has("texture")) s.texture = read_texture(r.child("texture"), r.path("texture"));
  if (!r.has("views")) bad(r.path("views"), "missing");
  const json& views = r.child("views");
  if (!views.is_array()) bad(r.path("views"), "expected an array");
  for (std::size_t i = 0; i < views.size(); ++i) {
    Reader v(views[i], r.path("views[" + std::to_string(i) + "]"));
    synth::ViewSpec vs;
    vs.off_nadir_deg = v.get("off_nadir_deg", vs.off_nadir_deg);
    vs.azimuth_deg = v.get("azimuth_deg", vs.azimuth_deg);
    const auto kind = v.get<std::string>("model", "affine");
    if (kind == "affine") vs.kind = synth::ModelKind::Affine;
    else if (kind == "cubic") vs.kind = synth::ModelKind::CubicPerspectiveFit;
    else bad(v.path("model"), "unknown model kind '" + kind + "'");
    v.finish();
    s.views.push_back(vs);
  }
  if (r.has("initial")) cfg.initial = read_initial(r.child("initial"), r.path("initial"));
  if (r.has("refine")) cfg.refine = read_refine(r.child("refine"), r.path("refine"));
  cfg.mask_margin_px = r.get("mask_margin_px", cfg.mask_margin_px);
  r.finish();
  s.validate();
  return cfg;
}

}  // namespace meshforge::config
