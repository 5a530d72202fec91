#pragma once

#include <filesystem>
#include <string>

#include "meshforge/eval.hpp"
#include "meshforge/imaging.hpp"
#include "meshforge/mesh.hpp"
#include "meshforge/rfm.hpp"

namespace meshforge::io {

namespace fs = std::filesystem;

/// 8- or 16-bit binary PGM; values scaled to [0, 1].
Raster read_pgm(const fs::path& path);
/// 16-bit binary PGM; values clamped to [0, 1]. Masked pixels are written as 0.
void write_pgm16(const fs::path& path, const Raster& image);

/// Little-endian float32 raster behind a u32 width, u32 height header.
/// Non-finite values mark masked pixels.
Raster read_float_raster(const fs::path& path);
void write_float_raster(const fs::path& path, const Raster& image);

/// PGM by magic number, anything else as a float raster.
Raster read_image(const fs::path& path);

/// Key-value RPC text (LINE_OFF: value, ...). Units after the number are ignored.
rfm::Model read_rpc(const fs::path& path);
void write_rpc(const fs::path& path, const rfm::Model& model);

TriMesh read_ply(const fs::path& path);
void write_ply(const fs::path& path, const TriMesh& mesh);

DemGrid read_esri_ascii(const fs::path& path);
void write_esri_ascii(const fs::path& path, const DemGrid& dem);

std::string metrics_json(const eval::MetricsReport& report);

}  // namespace meshforge::io
