#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "meshforge/commands.hpp"
#include "meshforge/parallel.hpp"

namespace cli = meshforge::cli;

int main(int argc, char** argv) {
  CLI::App app{"meshforge: photometric refinement of terrain meshes under RPC sensor models"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (default: MESHFORGE_THREADS, else hardware count)")
      ->check(CLI::PositiveNumber);

  std::string scene_path, out_dir;
  std::optional<std::uint64_t> seed;
  auto* synth = app.add_subcommand("synth", "render a synthetic scene and its project.json");
  synth->add_option("scene", scene_path, "scene description (JSON)")->required();
  synth->add_option("-o,--out", out_dir, "output directory")->required();
  synth->add_option("--seed", seed, "override the scene seed");

  cli::ValidateOptions vopts;
  std::vector<std::string> rpcs;
  std::vector<double> anchor;
  std::optional<double> terrain_height;
  std::string csv_dir;
  auto* validate = app.add_subcommand("validate", "frame approximation and ray straightness reports");
  validate->add_option("rpc", rpcs, "RPC files")->required();
  validate->add_option("--anchor", anchor, "anchor lat lon height (default: first model's offsets)")
      ->expected(3);
  validate->add_option("--terrain-height", terrain_height, "height of the frame test plane");
  validate->add_option("--csv", csv_dir, "also write CSV tables to this directory");

  std::string dem_path, mesh_path;
  int decimation = 1;
  auto* m2d = app.add_subcommand("mesh-from-dem", "triangulate a DEM");
  m2d->add_option("dem", dem_path, "ESRI ASCII grid")->required();
  m2d->add_option("-o,--out", mesh_path, "output PLY")->required();
  m2d->add_option("--decimation", decimation, "cells per vertex")->check(CLI::PositiveNumber);

  std::string grid_path, out_dem;
  std::optional<double> cell_size;
  auto* d2m = app.add_subcommand("dem-from-mesh", "extract a DEM from a mesh");
  d2m->add_option("mesh", mesh_path, "PLY mesh")->required();
  d2m->add_option("-o,--out", out_dem, "output ESRI ASCII grid")->required();
  auto* grid_opt = d2m->add_option("--grid", grid_path, "template grid");
  d2m->add_option("--cell-size", cell_size, "cell size when no template is given")->excludes(grid_opt);

  cli::EvaluateOptions eopts;
  std::string test_path, truth_path, mask_path, json_out, residual_out;
  bool no_align = false;
  auto* evaluate = app.add_subcommand("evaluate", "accuracy metrics of a DEM against a reference");
  evaluate->add_option("test", test_path, "DEM to evaluate")->required();
  evaluate->add_option("truth", truth_path, "reference DEM")->required();
  evaluate->add_option("--mask", mask_path, "evaluation mask grid");
  evaluate->add_option("--truncation", eopts.truncation_m, "RMSE truncation in meters");
  evaluate->add_flag("--no-align", no_align, "skip the vertical median alignment");
  evaluate->add_option("--json", json_out, "write metrics JSON here");
  evaluate->add_option("--residual", residual_out, "write the residual grid here");

  std::string config_path;
  bool dry_run = false;
  auto* refine = app.add_subcommand("refine", "run hierarchical refinement from a project config");
  refine->add_option("config", config_path, "project config (JSON)")->required();
  refine->add_flag("--dry-run", dry_run, "only check the config and its inputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kConfigError;
  }
  if (threads > 0) meshforge::set_thread_count(static_cast<std::size_t>(threads));

  return cli::run_command(
      [&] {
        if (*synth) {
          cli::cmd_synth(scene_path, out_dir, seed, std::cout);
        } else if (*validate) {
          for (const auto& r : rpcs) vopts.rpcs.emplace_back(r);
          if (!anchor.empty()) vopts.anchor = meshforge::GeoPoint{anchor[0], anchor[1], anchor[2]};
          vopts.terrain_height = terrain_height;
          if (!csv_dir.empty()) vopts.csv_dir = csv_dir;
          cli::cmd_validate(vopts, std::cout);
        } else if (*m2d) {
          cli::cmd_mesh_from_dem(dem_path, decimation, mesh_path, std::cout);
        } else if (*d2m) {
          std::optional<cli::fs::path> grid;
          if (!grid_path.empty()) grid = grid_path;
          cli::cmd_dem_from_mesh(mesh_path, grid, cell_size, out_dem, std::cout);
        } else if (*evaluate) {
          eopts.test = test_path;
          eopts.truth = truth_path;
          if (!mask_path.empty()) eopts.mask = mask_path;
          eopts.align = !no_align;
          if (!json_out.empty()) eopts.json_out = json_out;
          if (!residual_out.empty()) eopts.residual_out = residual_out;
          cli::cmd_evaluate(eopts, std::cout);
        } else if (*refine) {
          cli::cmd_refine(config_path, dry_run, std::cout);
        }
      },
      std::cerr);
}
