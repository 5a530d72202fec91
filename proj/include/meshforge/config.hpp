#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "meshforge/refine.hpp"
#include "meshforge/rfm.hpp"
#include "meshforge/synth.hpp"

namespace meshforge::config {

namespace fs = std::filesystem;

struct ViewInput {
  fs::path image;
  fs::path rpc;
  double shift_samp = 0.0;
  double shift_line = 0.0;
};

/// Inputs and settings of a refinement run. Relative paths are resolved
/// against the directory of the config file.
struct ProjectConfig {
  std::optional<GeoPoint> anchor;  // first model's offsets when unset
  std::vector<ViewInput> views;
  std::optional<fs::path> initial_dem;
  std::optional<fs::path> initial_mesh;
  std::optional<fs::path> grid;  // output DEM layout; defaults to initial_dem, then truth_dem
  std::optional<fs::path> truth_dem;
  std::optional<fs::path> mask;
  fs::path output_dir = "refined";
  double truncation_m = 3.0;
  refine::RefineConfig refine;
};

/// Parses the JSON file; throws Io if it cannot be read and Config on
/// malformed content or unknown keys.
ProjectConfig load_project(const fs::path& path);
/// Checks values and that every referenced input exists (Io, naming the
/// path) without touching the file system.
void validate_project(const ProjectConfig& cfg);
std::string project_to_json(const ProjectConfig& cfg, const fs::path& relative_to);

/// Start mesh derived from the truth surface by the synth command.
struct InitialSurface {
  double sigma = 0.0;  // Gaussian vertex noise, m
  bool z_only = false;
  std::uint64_t seed = 2;
  /// Optional vertical offset of a rectangular block of vertices.
  double block_offset = 0.0;
  double block_center_x = 0.0, block_center_y = 0.0;
  double block_half_x = 0.0, block_half_y = 0.0;
};

struct SceneConfig {
  synth::SceneSpec spec;
  std::uint64_t seed = 1;
  InitialSurface initial;
  refine::RefineConfig refine;
  /// Border excluded from the evaluation mask, in pixels.
  double mask_margin_px = 8.0;
};

SceneConfig load_scene(const fs::path& path);

}  // namespace meshforge::config
