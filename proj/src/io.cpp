#include "meshforge/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <json.hpp>

#include "meshforge/error.hpp"

namespace meshforge::io {

namespace {

[[noreturn]] void fail(const fs::path& path, const std::string& what) {
  throw Error(ErrorKind::Io, path.string() + ": " + what);
}

std::ifstream open_in(const fs::path& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) fail(path, "cannot open for reading");
  return in;
}

std::ofstream open_out(const fs::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) fail(path, "cannot open for writing");
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) fail(path, "write failed");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// PGM header token, skipping whitespace and comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

std::uint32_t read_u32_le(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

}  // namespace

Raster read_pgm(const fs::path& path) {
  auto in = open_in(path, true);
  if (pgm_token(in) != "P5") fail(path, "not a binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(pgm_token(in));
    h = std::stoi(pgm_token(in));
    maxval = std::stoi(pgm_token(in));
  } catch (const std::exception&) {
    fail(path, "malformed PGM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) fail(path, "unsupported PGM dimensions");
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> data(static_cast<std::size_t>(w) * h * bytes);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (in.gcount() != static_cast<std::streamsize>(data.size())) fail(path, "truncated PGM data");
  Raster r(w, h);
  auto v = r.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const unsigned raw = bytes == 2 ? (data[2 * i] << 8) | data[2 * i + 1] : data[i];
    v[i] = static_cast<double>(raw) / maxval;
  }
  return r;
}

void write_pgm16(const fs::path& path, const Raster& image) {
  auto out = open_out(path, true);
  out << "P5\n" << image.width() << ' ' << image.height() << "\n65535\n";
  std::vector<char> data(image.size() * 2);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const double v = image.valid(x, y) ? std::clamp(image.at(x, y), 0.0, 1.0) : 0.0;
      const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
      const std::size_t i = image.index(x, y);
      data[2 * i] = static_cast<char>(q >> 8);
      data[2 * i + 1] = static_cast<char>(q & 0xff);
    }
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  finish(out, path);
}

Raster read_float_raster(const fs::path& path) {
  auto in = open_in(path, true);
  const std::uint32_t w = read_u32_le(in), h = read_u32_le(in);
  if (!in || w == 0 || h == 0 || w > (1u << 20) || h > (1u << 20)) fail(path, "bad float raster header");
  Raster r(static_cast<int>(w), static_cast<int>(h));
  for (std::uint32_t y = 0; y < h; ++y)
    for (std::uint32_t x = 0; x < w; ++x) {
      const std::uint32_t bits = read_u32_le(in);
      const float f = std::bit_cast<float>(bits);
      const int xi = static_cast<int>(x), yi = static_cast<int>(y);
      if (std::isfinite(f)) {
        r.at(xi, yi) = f;
      } else {
        r.set_valid(xi, yi, false);
      }
    }
  if (!in) fail(path, "truncated float raster");
  return r;
}

void write_float_raster(const fs::path& path, const Raster& image) {
  auto out = open_out(path, true);
  write_u32_le(out, static_cast<std::uint32_t>(image.width()));
  write_u32_le(out, static_cast<std::uint32_t>(image.height()));
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const float f = image.valid(x, y) ? static_cast<float>(image.at(x, y))
                                        : std::numeric_limits<float>::quiet_NaN();
      write_u32_le(out, std::bit_cast<std::uint32_t>(f));
    }
  finish(out, path);
}

Raster read_image(const fs::path& path) {
  auto in = open_in(path, true);
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (magic[0] == 'P' && magic[1] == '5') return read_pgm(path);
  return read_float_raster(path);
}

namespace {

constexpr std::array<const char*, 4> kCoeffKeys = {"SAMP_NUM_COEFF_", "SAMP_DEN_COEFF_",
                                                   "LINE_NUM_COEFF_", "LINE_DEN_COEFF_"};

std::array<rfm::Coefficients*, 4> coefficient_blocks(rfm::Model& m) {
  return {&m.num_samp, &m.den_samp, &m.num_line, &m.den_line};
}

struct ScalarKey {
  const char* name;
  double rfm::Model::*field;
};

constexpr std::array<ScalarKey, 10> kScalarKeys = {{
    {"LINE_OFF", &rfm::Model::line_off},
    {"SAMP_OFF", &rfm::Model::samp_off},
    {"LAT_OFF", &rfm::Model::lat_off},
    {"LONG_OFF", &rfm::Model::lon_off},
    {"HEIGHT_OFF", &rfm::Model::height_off},
    {"LINE_SCALE", &rfm::Model::line_scale},
    {"SAMP_SCALE", &rfm::Model::samp_scale},
    {"LAT_SCALE", &rfm::Model::lat_scale},
    {"LONG_SCALE", &rfm::Model::lon_scale},
    {"HEIGHT_SCALE", &rfm::Model::height_scale},
}};

}  // namespace

rfm::Model read_rpc(const fs::path& path) {
  auto in = open_in(path, false);
  std::map<std::string, double> values;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::string key = line.substr(0, colon);
    key.erase(std::remove_if(key.begin(), key.end(), [](unsigned char c) { return std::isspace(c); }),
              key.end());
    std::istringstream rest(line.substr(colon + 1));
    double v;
    if (!(rest >> v)) fail(path, "line " + std::to_string(lineno) + ": no numeric value for " + key);
    values[key] = v;
  }
  auto get = [&](const std::string& key) {
    const auto it = values.find(key);
    if (it == values.end()) fail(path, "missing key " + key);
    return it->second;
  };
  rfm::Model m;
  for (const auto& k : kScalarKeys) m.*(k.field) = get(k.name);
  const auto blocks = coefficient_blocks(m);
  for (std::size_t b = 0; b < 4; ++b)
    for (int i = 0; i < 20; ++i) (*blocks[b])[i] = get(kCoeffKeys[b] + std::to_string(i + 1));
  try {
    m.validate();
  } catch (const Error& e) {
    fail(path, e.what());
  }
  return m;
}

void write_rpc(const fs::path& path, const rfm::Model& model) {
  auto out = open_out(path, false);
  rfm::Model m = model;
  for (const auto& k : kScalarKeys) out << k.name << ": " << fmt(m.*(k.field)) << '\n';
  // Line blocks first, as in the usual RPC00B text files.
  const auto blocks = coefficient_blocks(m);
  for (std::size_t b : {2u, 3u, 0u, 1u})
    for (int i = 0; i < 20; ++i)
      out << kCoeffKeys[b] << i + 1 << ": " << fmt((*blocks[b])[i]) << '\n';
  finish(out, path);
}

TriMesh read_ply(const fs::path& path) {
  auto in = open_in(path, false);
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) fail(path, "not a PLY file");
  std::size_t nv = 0, nf = 0;
  std::vector<std::string> vprops;
  std::string current;
  bool ascii = false;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "format") {
      std::string kind;
      ss >> kind;
      ascii = kind == "ascii";
    } else if (word == "element") {
      std::size_t count = 0;
      ss >> current >> count;
      if (current == "vertex") nv = count;
      if (current == "face") nf = count;
    } else if (word == "property" && current == "vertex") {
      std::string type, name;
      ss >> type >> name;
      vprops.push_back(name);
    } else if (word == "end_header") {
      break;
    }
  }
  if (!ascii) fail(path, "only ASCII PLY is supported");
  const auto find = [&](const char* n) {
    const auto it = std::find(vprops.begin(), vprops.end(), n);
    if (it == vprops.end()) fail(path, std::string("vertex property ") + n + " missing");
    return static_cast<std::size_t>(it - vprops.begin());
  };
  const std::size_t ix = find("x"), iy = find("y"), iz = find("z");
  std::vector<LocalPoint> verts(nv);
  std::vector<double> row(vprops.size());
  for (std::size_t v = 0; v < nv; ++v) {
    for (double& x : row)
      if (!(in >> x)) fail(path, "truncated vertex list");
    verts[v] = {row[ix], row[iy], row[iz]};
  }
  std::vector<Face> faces;
  faces.reserve(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    std::size_t k = 0;
    if (!(in >> k)) fail(path, "truncated face list");
    std::vector<std::uint32_t> idx(k);
    for (auto& i : idx)
      if (!(in >> i)) fail(path, "truncated face list");
    // Polygons are fanned into triangles.
    for (std::size_t t = 1; t + 1 < k; ++t) faces.push_back({idx[0], idx[t], idx[t + 1]});
  }
  try {
    return TriMesh(std::move(verts), std::move(faces));
  } catch (const Error& e) {
    fail(path, e.what());
  }
}

void write_ply(const fs::path& path, const TriMesh& mesh) {
  auto out = open_out(path, false);
  out << "ply\nformat ascii 1.0\nelement vertex " << mesh.vertex_count()
      << "\nproperty double x\nproperty double y\nproperty double z\nelement face "
      << mesh.face_count() << "\nproperty list uchar int vertex_indices\nend_header\n";
  for (const auto& v : mesh.vertices()) out << fmt(v.x()) << ' ' << fmt(v.y()) << ' ' << fmt(v.z()) << '\n';
  for (const auto& f : mesh.faces()) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  finish(out, path);
}

DemGrid read_esri_ascii(const fs::path& path) {
  auto in = open_in(path, false);
  std::map<std::string, double> header;
  bool centered_x = false, centered_y = false;
  for (int i = 0; i < 6; ++i) {
    std::string key;
    double v;
    const auto pos = in.tellg();
    if (!(in >> key)) fail(path, "truncated header");
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    if (!std::isalpha(static_cast<unsigned char>(key[0]))) {
      in.seekg(pos);  // optional NODATA_value absent
      break;
    }
    if (!(in >> v)) fail(path, "bad header value for " + key);
    if (key == "xllcenter") centered_x = true;
    if (key == "yllcenter") centered_y = true;
    header[key] = v;
  }
  auto get = [&](const std::string& a, const std::string& b = "") {
    if (header.count(a)) return header[a];
    if (!b.empty() && header.count(b)) return header[b];
    fail(path, "missing header key " + a);
  };
  const int cols = static_cast<int>(get("ncols")), rows = static_cast<int>(get("nrows"));
  const double cs = get("cellsize");
  if (cols <= 0 || rows <= 0 || !(cs > 0.0)) fail(path, "invalid grid dimensions");
  const double nodata = header.count("nodata_value") ? header["nodata_value"] : -9999.0;
  const double xll = get("xllcorner", "xllcenter"), yll = get("yllcorner", "yllcenter");
  DemGrid dem(centered_x ? xll : xll + 0.5 * cs, centered_y ? yll : yll + 0.5 * cs, cs, cols, rows);
  dem.nodata = nodata;
  for (int r = rows - 1; r >= 0; --r)
    for (int c = 0; c < cols; ++c) {
      double v;
      if (!(in >> v)) fail(path, "truncated grid data");
      dem.at(c, r) = v == nodata ? std::numeric_limits<double>::quiet_NaN() : v;
    }
  return dem;
}

void write_esri_ascii(const fs::path& path, const DemGrid& dem) {
  auto out = open_out(path, false);
  out << "ncols " << dem.cols << "\nnrows " << dem.rows << "\nxllcorner "
      << fmt(dem.origin_x - 0.5 * dem.cell_size) << "\nyllcorner " << fmt(dem.origin_y - 0.5 * dem.cell_size)
      << "\ncellsize " << fmt(dem.cell_size) << "\nNODATA_value " << fmt(dem.nodata) << '\n';
  for (int r = dem.rows - 1; r >= 0; --r) {
    for (int c = 0; c < dem.cols; ++c) {
      if (c) out << ' ';
      out << (dem.has(c, r) ? fmt(dem.at(c, r)) : fmt(dem.nodata));
    }
    out << '\n';
  }
  finish(out, path);
}

std::string metrics_json(const eval::MetricsReport& r) {
  nlohmann::ordered_json j;
  j["completeness_pct"] = r.completeness_pct;
  j["rmse_trunc_m"] = r.rmse_defined ? nlohmann::ordered_json(r.rmse_trunc_m) : nlohmann::ordered_json();
  j["nmad_m"] = r.nmad_m;
  j["perc68_m"] = r.perc68_m;
  j["n_total"] = r.n_total;
  j["n_valid"] = r.n_valid;
  j["truncation_m"] = r.truncation_m;
  j["vertical_offset_applied_m"] = r.vertical_offset_applied_m;
  return j.dump(2);
}

}  // namespace meshforge::io
