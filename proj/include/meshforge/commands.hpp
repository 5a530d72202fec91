#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "meshforge/rfm.hpp"

namespace meshforge::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kIoError = 3, kNumericalError = 4 };

/// Runs a command body, printing a one-line diagnostic to `err` and mapping
/// the failure class to an exit status.
int run_command(const std::function<void()>& body, std::ostream& err);

/// Renders a scene description into images, RPC files, truth and start
/// surfaces, an evaluation mask and a ready-to-run project.json.
void cmd_synth(const fs::path& scene_config, const fs::path& out_dir,
               std::optional<std::uint64_t> seed, std::ostream& out);

struct ValidateOptions {
  std::vector<fs::path> rpcs;
  std::optional<GeoPoint> anchor;  // first model's offsets when unset
  std::optional<double> terrain_height;
  std::optional<fs::path> csv_dir;
};
/// Prints the frame approximation and ray straightness reports.
void cmd_validate(const ValidateOptions& opts, std::ostream& out);

void cmd_mesh_from_dem(const fs::path& dem, int decimation, const fs::path& out_mesh, std::ostream& out);

/// Extracts a DEM on the template grid, or on a grid of `cell_size`
/// covering the mesh footprint.
void cmd_dem_from_mesh(const fs::path& mesh, const std::optional<fs::path>& grid,
                       std::optional<double> cell_size, const fs::path& out_dem, std::ostream& out);

struct EvaluateOptions {
  fs::path test;
  fs::path truth;
  std::optional<fs::path> mask;
  double truncation_m = 3.0;
  bool align = true;
  std::optional<fs::path> json_out;
  std::optional<fs::path> residual_out;
};
void cmd_evaluate(const EvaluateOptions& opts, std::ostream& out);

/// Full refinement run from a project config; with dry_run only the config
/// and the existence of its inputs are checked.
void cmd_refine(const fs::path& config, bool dry_run, std::ostream& out);

}  // namespace meshforge::cli
