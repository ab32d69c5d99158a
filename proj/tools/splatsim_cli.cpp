// Copyright 2026 The splatsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "splatsim/experiment.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace splatsim;

int fail(const std::string& command, const std::string& message) {
  nlohmann::json err = {{"error", message}, {"command", command}};
  std::cerr << err.dump() << "\n";
  return 2;
}

// Pipeline flags shared by `render` and `sweep`, applied as config entries
// so that they go through the same validation as config files.
struct PipelineFlagSet {
  std::vector<std::pair<std::string, std::string>> entries;

  void add(CLI::App* app) {
    auto flag = [&](const std::string& name, const std::string& key, const std::string& help) {
      app->add_flag_callback("--" + name, [this, key] { entries.emplace_back(key, "true"); }, help);
    };
    auto option = [&](const std::string& name, const std::string& key, const std::string& help) {
      app->add_option_function<std::string>(
          "--" + name, [this, key](const std::string& v) { entries.emplace_back(key, v); }, help);
    };
    flag("dr-fc", "pipeline.dr_fc", "grid-level frustum culling before fetch");
    flag("atg", "pipeline.atg", "adaptive tile grouping");
    flag("aii", "pipeline.aii", "inter/intra-frame bucket reuse in sorting");
    flag("lut-exp", "pipeline.lut_exp", "LUT exponential in blending");
    app->add_flag_callback(
        "--all",
        [this] {
          for (const char* key : {"pipeline.dr_fc", "pipeline.atg", "pipeline.aii", "pipeline.lut_exp"})
            entries.emplace_back(key, "true");
        },
        "enable all four optimizations");
    option("grid-n", "pipeline.grid_n", "culling grid resolution");
    option("buckets", "pipeline.buckets", "sort buckets per tile block (power of two)");
    option("tile-size", "pipeline.tile_size", "tile side in pixels");
    option("block-side", "pipeline.block_side", "tile block side in tiles");
    option("udt", "pipeline.udt", "grouping threshold interpolation in [0,1]");
    option("k", "pipeline.k", "incident strengths per block in the threshold statistic");
    option("max-group", "pipeline.max_group", "largest group in blocks (0 = derive)");
    option("term-eps", "pipeline.term_eps", "transmittance termination threshold");
    option("buffer-bytes", "pipeline.buffer_bytes", "on-chip buffer capacity");
    option("burst-bytes", "pipeline.burst_bytes", "DRAM burst size");
    option("lut-precision", "pipeline.lut_precision", "exact|half");
    option("threads", "pipeline.threads", "worker threads (0 = all cores)");
    app->add_flag_callback("--quantize16", [this] { entries.emplace_back("pipeline.quantize16", "true"); },
                           "round parameters to binary16 precision");
    app->add_option_function<std::vector<std::string>>(
        "--set",
        [this](const std::vector<std::string>& kvs) {
          for (const auto& kv : kvs) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value");
            entries.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
          }
        },
        "override any config key (key=value)");
  }

  void apply(ExperimentConfig& c) const {
    for (const auto& [k, v] : entries) apply_config_entry(c, k, v);
  }
};

void print_lut_audit(LutPrecision precision, const std::string& csv_path) {
  const LutBank<float> luts(precision);
  std::printf("segment,j0,j1,j2,j3,j4,j5,j6,j7\n");
  for (int k = 0; k < kLutSegments; ++k) {
    std::printf("%d", k);
    for (int j = 0; j < kLutEntries; ++j) std::printf(",%.9g", static_cast<double>(luts.entry(k, j)));
    std::printf("\n");
  }
  const LutAudit a = audit_lut(luts);
  std::printf("max_rel_error=%.9g\nmax_ulp=%.6g\nargmax_frac12=%u\n", a.max_rel_error, a.max_ulp,
              a.argmax);
  if (!csv_path.empty()) {
    std::string csv = "frac12,rel_error\n";
    char buf[64];
    for (std::size_t f = 0; f < a.rel_error.size(); ++f) {
      std::snprintf(buf, sizeof buf, "%zu,%.9g\n", f, a.rel_error[f]);
      csv += buf;
    }
    write_text_file(csv_path, csv);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"splatsim: dynamic Gaussian splatting accelerator simulator"};
  app.require_subcommand(1);

  // gen-scene
  auto* gen_scene = app.add_subcommand("gen-scene", "write a seeded synthetic scene");
  SyntheticSpec spec;
  std::string scene_out, distribution = "uniform";
  int layout_grid = 0;
  bool static_scene = false;
  gen_scene->add_option("--count", spec.count, "number of Gaussians");
  gen_scene->add_option("--seed", spec.seed, "RNG seed");
  gen_scene->add_option("--extent", spec.extent, "half-width of the scene cube");
  gen_scene->add_option("--scale", spec.scale, "median spatial standard deviation");
  gen_scene->add_option("--motion", spec.motion, "speed per unit time");
  gen_scene->add_option("--temporal-scale", spec.temporal_scale, "median temporal deviation");
  gen_scene->add_option("--sh-degree", spec.sh_degree, "SH degree")->check(CLI::Range(0, 3));
  gen_scene->add_option("--distribution", distribution, "uniform|clustered|skewed")
      ->check(CLI::IsMember({"uniform", "clustered", "skewed"}));
  gen_scene->add_flag("--elongated", spec.elongated, "vertically elongated splats");
  gen_scene->add_flag("--static", static_scene, "no temporal dimension");
  gen_scene->add_option("--layout-grid", layout_grid, "append a culling grid layout of this size");
  gen_scene->add_option("--out", scene_out, "output .g4ds path")->required();

  // gen-traj
  auto* gen_traj = app.add_subcommand("gen-traj", "write a head-motion camera trajectory");
  ExperimentConfig traj_cfg;
  std::string traj_out;
  std::string mode = "average", rig = "orbit";
  gen_traj->add_option("--mode", mode, "average|extreme|custom")
      ->check(CLI::IsMember({"average", "extreme", "custom"}));
  gen_traj->add_option("--rig", rig, "orbit|pan")->check(CLI::IsMember({"orbit", "pan"}));
  gen_traj->add_option("--frames", traj_cfg.traj.frames, "frame count");
  gen_traj->add_option("--fps", traj_cfg.traj.fps, "frames per second");
  gen_traj->add_option("--yaw-rate", traj_cfg.traj.yaw_rate, "deg/s (custom mode)");
  gen_traj->add_option("--pitch-rate", traj_cfg.traj.pitch_rate, "deg/s (custom mode)");
  gen_traj->add_option("--radius", traj_cfg.traj.radius, "orbit radius");
  gen_traj->add_option("--width", traj_cfg.traj.width, "image width");
  gen_traj->add_option("--height", traj_cfg.traj.height, "image height");
  gen_traj->add_option("--focal", traj_cfg.traj.focal, "focal length in pixels");
  gen_traj->add_option("--out", traj_out, "output CSV path")->required();

  // render
  auto* render = app.add_subcommand("render", "render a trajectory and write reports");
  std::string render_config, render_scene, render_traj, render_out;
  bool render_images = false, render_baseline = false;
  PipelineFlagSet render_flags;
  render->add_option("--config", render_config, "config file (flags override it)");
  render->add_option("--scene", render_scene, "scene file (default: synthetic)");
  render->add_option("--traj", render_traj, "trajectory CSV (default: generated)");
  render->add_option("--out-dir", render_out, "report directory");
  render->add_flag("--images", render_images, "write a PPM per frame");
  render->add_flag("--baseline", render_baseline, "also render the all-off baseline");
  render_flags.add(render);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run a sweep from a config file");
  std::string sweep_config, sweep_out;
  PipelineFlagSet sweep_flags;
  sweep->add_option("config", sweep_config, "config file")->required();
  sweep->add_option("--out-dir", sweep_out, "report directory");
  sweep_flags.add(sweep);

  // lut-audit
  auto* lut = app.add_subcommand("lut-audit", "dump the LUTs and the exhaustive error sweep");
  std::string lut_precision = "exact", lut_csv;
  lut->add_option("--precision", lut_precision, "exact|half")->check(CLI::IsMember({"exact", "half"}));
  lut->add_option("--csv", lut_csv, "write per-fraction errors to this CSV");

  // compare
  auto* compare = app.add_subcommand("compare", "PSNR between two PPM images");
  std::string img_a, img_b;
  compare->add_option("a", img_a, "first image")->required();
  compare->add_option("b", img_b, "second image")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("parse", e.what());
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (gen_scene->parsed()) {
      spec.dynamic = !static_scene;
      spec.distribution = distribution == "clustered" ? Distribution::kClustered
                          : distribution == "skewed"  ? Distribution::kSkewed
                                                      : Distribution::kUniform;
      const auto scene = gen_synthetic(spec);
      SceneFile f = encode_scene(scene, spec.sh_degree, spec.dynamic);
      if (layout_grid > 0) f.layout = build_layout(decode_scene(f), layout_grid);
      write_scene_file(scene_out, f);
      std::printf("wrote %zu Gaussians to %s\n", scene.size(), scene_out.c_str());
    } else if (gen_traj->parsed()) {
      apply_config_entry(traj_cfg, "traj.mode", mode);
      apply_config_entry(traj_cfg, "traj.rig", rig);
      write_text_file(traj_out, trajectory_csv(gen_trajectory(traj_cfg.traj)));
      std::printf("wrote %d frames to %s\n", traj_cfg.traj.frames, traj_out.c_str());
    } else if (render->parsed()) {
      ExperimentConfig c = render_config.empty() ? ExperimentConfig{} : load_config(render_config);
      if (!render_scene.empty()) apply_config_entry(c, "scene.path", render_scene);
      if (!render_traj.empty()) apply_config_entry(c, "traj.path", render_traj);
      if (!render_out.empty()) apply_config_entry(c, "output.dir", render_out);
      if (render_images) apply_config_entry(c, "output.images", "true");
      if (render_baseline) apply_config_entry(c, "experiment.baseline", "true");
      render_flags.apply(c);
      finalize_config(c, "command line");
      const auto r = run_experiment(c);
      std::printf("rendered %zu frames into %s\n", r.rows.size(), c.output_dir.c_str());
    } else if (sweep->parsed()) {
      ExperimentConfig c = load_config(sweep_config);
      if (!sweep_out.empty()) apply_config_entry(c, "output.dir", sweep_out);
      sweep_flags.apply(c);
      finalize_config(c, "command line");
      const auto r = run_experiment(c);
      std::fputs(r.summary_csv.c_str(), stdout);
    } else if (lut->parsed()) {
      print_lut_audit(lut_precision == "half" ? LutPrecision::kHalf : LutPrecision::kExact, lut_csv);
    } else if (compare->parsed()) {
      const double db = psnr(read_ppm(img_a), read_ppm(img_b));
      std::printf("psnr_db=%s\n", format_number(db, false).c_str());
    }
  } catch (const std::exception& e) {
    return fail(command, e.what());
  }
  return 0;
}
