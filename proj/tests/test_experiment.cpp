// Copyright 2026 The splatsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "splatsim/experiment.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <limits>
#include <string>

namespace splatsim {
namespace {

namespace fs = std::filesystem;

std::string small_config(const std::string& extra = "") {
  return "# tiny run\n"
         "experiment.name = unit\n"
         "scene.count = 400\n"
         "scene.seed = 5\n"
         "traj.frames = 2\n"
         "traj.width = 64\n"
         "traj.height = 48\n"
         "traj.focal = 60\n"
         "pipeline.dr_fc = true\n"
         "pipeline.atg = true\n"
         "pipeline.aii = true\n" +
         extra;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("splatsim_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text, "cfg");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, ParsesValuesAndComments) {
  const auto c = parse_config(small_config("pipeline.background = 0.1, 0.2 ,0.3  # grey\n"), "cfg");
  EXPECT_EQ(c.name, "unit");
  EXPECT_EQ(c.synth.count, 400u);
  EXPECT_EQ(c.traj.frames, 2);
  EXPECT_TRUE(c.pipeline.flags.dr_fc);
  EXPECT_FALSE(c.pipeline.flags.lut_exp);
  EXPECT_FLOAT_EQ(c.pipeline.background(2), 0.3f);
  EXPECT_EQ(c.entries.size(), 11u);
}

TEST(Config, ErrorsNameSourceLineAndKey) {
  EXPECT_EQ(config_error("scene.count = 3\nfoo.bar = 1\n"), "cfg:2: foo.bar: unknown key");
  EXPECT_EQ(config_error("\n\npipeline.udt = 1.5\n"), "cfg:3: pipeline.udt: value 1.5 outside [0, 1]");
  EXPECT_EQ(config_error("pipeline.atg = maybe\n"),
            "cfg:1: pipeline.atg: expected a boolean, got 'maybe'");
  EXPECT_EQ(config_error("scene.count = 12x\n"), "cfg:1: scene.count: expected an integer, got '12x'");
  EXPECT_EQ(config_error("just text\n"), "cfg:1: expected 'key = value'");
  EXPECT_EQ(config_error("sweep.buckets = 4, 6\n"),
            "cfg:1: sweep.buckets: bucket count 6 is not a power of two");
  EXPECT_EQ(config_error("pipeline.buckets = 12\n"), "cfg: pipeline.buckets: must be a power of two");
  EXPECT_EQ(config_error("traj.znear = 5\ntraj.zfar = 2\n"), "cfg: traj.znear: must be below traj.zfar");
}

TEST(Config, KeysAreListed) {
  const auto keys = config_keys();
  for (const char* k : {"pipeline.dr_fc", "sweep.udt", "traj.mode", "scene.path", "output.dir"})
    EXPECT_NE(std::find(keys.begin(), keys.end(), k), keys.end()) << k;
  EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
}

TEST(SweepPoints, CartesianProduct) {
  const auto c = parse_config(small_config("sweep.grid_n = 2,4\nsweep.buckets = 4,8,16\n"
                                           "sweep.mode = average, extreme\n"));
  const auto pts = sweep_points(c);
  ASSERT_EQ(pts.size(), 12u);
  EXPECT_EQ(pts[0].mode, MotionMode::kAverage);
  EXPECT_EQ(pts[0].grid_n, 2);
  EXPECT_EQ(pts[1].buckets, 8);
  EXPECT_EQ(pts[11].mode, MotionMode::kExtreme);
  EXPECT_EQ(pts[11].grid_n, 4);
  EXPECT_EQ(pts[11].buckets, 16);
}

TEST(RunExperiment, OneFrameGivesOneRow) {
  auto c = parse_config(small_config("traj.frames = 1\n"));
  const auto r = run_experiment(c, false);
  ASSERT_EQ(r.rows.size(), 1u);
  // Header plus one data row.
  EXPECT_EQ(std::count(r.frames_csv.begin(), r.frames_csv.end(), '\n'), 2);
}

TEST(RunExperiment, RerunsAreByteIdentical) {
  const auto c = parse_config(small_config("experiment.baseline = true\n"));
  const auto a = run_experiment(c, false), b = run_experiment(c, false);
  EXPECT_EQ(a.frames_csv, b.frames_csv);
  EXPECT_EQ(a.summary_csv, b.summary_csv);
  EXPECT_EQ(a.summary_json, b.summary_json);
}

TEST(RunExperiment, SweepRowCountAndAggregates) {
  const auto c = parse_config(small_config("sweep.buckets = 4,8\nsweep.udt = 0.25,0.75\n"
                                           "traj.frames = 3\nexperiment.baseline = true\n"));
  const auto r = run_experiment(c, false);
  ASSERT_EQ(r.points.size(), 4u);
  ASSERT_EQ(r.rows.size(), 12u);
  const auto json = nlohmann::json::parse(r.summary_json);
  ASSERT_EQ(json["points"].size(), 4u);
  for (std::size_t pi = 0; pi < r.points.size(); ++pi) {
    std::uint64_t fetched = 0, misses = 0, base_misses = 0;
    double energy = 0, min_psnr = std::numeric_limits<double>::infinity();
    for (const auto& row : r.rows)
      if (row.point == pi) {
        fetched += row.metrics.fetch.records;
        misses += row.metrics.buffer.misses;
        base_misses += row.baseline->buffer.misses;
        energy += row.metrics.dram_energy_pj;
        min_psnr = std::min(min_psnr, row.metrics.psnr_db);
      }
    const auto& jp = json["points"][pi];
    EXPECT_EQ(jp["metrics"]["fetch_records_sum"].get<std::uint64_t>(), fetched);
    EXPECT_EQ(jp["metrics"]["buffer_misses_sum"].get<std::uint64_t>(), misses);
    EXPECT_NEAR(jp["metrics"]["dram_energy_pj_mean"].get<double>(), energy / 3, 1e-6 * energy);
    EXPECT_NEAR(jp["baseline"]["miss_ratio"].get<double>(),
                static_cast<double>(base_misses) / static_cast<double>(misses), 1e-9);
    if (std::isinf(min_psnr))
      EXPECT_EQ(jp["baseline"]["min_psnr_db"].get<std::string>(), "inf");
    else
      EXPECT_NEAR(jp["baseline"]["min_psnr_db"].get<double>(), min_psnr, 1e-6);
  }
}

TEST(RunExperiment, WritesReportsAndImages) {
  const fs::path dir = temp_dir("reports");
  auto c = parse_config(small_config("output.images = true\noutput.dir = " + dir.string() + "\n"));
  run_experiment(c);
  EXPECT_TRUE(fs::exists(dir / "frames.csv"));
  EXPECT_TRUE(fs::exists(dir / "summary.csv"));
  EXPECT_TRUE(fs::exists(dir / "summary.json"));
  EXPECT_TRUE(fs::exists(dir / "p000_g4_n8_b4_f0000.ppm"));
  EXPECT_TRUE(fs::exists(dir / "p000_g4_n8_b4_f0001.ppm"));
  const auto json = nlohmann::json::parse(read_text_file((dir / "summary.json").string()));
  EXPECT_EQ(json["name"], "unit");
  EXPECT_EQ(json["config"]["scene.count"], "400");
  fs::remove_all(dir);
}

TEST(RunExperiment, SceneAndTrajectoryFiles) {
  const fs::path dir = temp_dir("files");
  fs::create_directories(dir);
  SyntheticSpec s;
  s.count = 300;
  const auto scene = gen_synthetic(s);
  SceneFile f = encode_scene(scene, 1, true);
  f.layout = build_layout(decode_scene(f), 4);
  write_scene_file((dir / "s.g4ds").string(), f);
  TrajectorySpec ts;
  ts.frames = 2;
  ts.width = 64;
  ts.height = 48;
  write_text_file((dir / "t.csv").string(), trajectory_csv(gen_trajectory(ts)));
  const auto c = parse_config("scene.path = " + (dir / "s.g4ds").string() + "\ntraj.path = " +
                              (dir / "t.csv").string() + "\npipeline.dr_fc = true\n");
  const auto r = run_experiment(c, false);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].metrics.scene_size, 300u);
  EXPECT_THROW(parse_config("traj.path = x.csv\nsweep.mode = extreme\n"), ConfigError);
  fs::remove_all(dir);
}

TEST(FormatNumber, Forms) {
  EXPECT_EQ(format_number(12, true), "12");
  EXPECT_EQ(format_number(0.1, false), "0.1");
  EXPECT_EQ(format_number(std::numeric_limits<double>::infinity(), false), "inf");
  EXPECT_EQ(format_number(std::nan(""), false), "nan");
  EXPECT_EQ(json_number(3, true), 3);
  EXPECT_EQ(json_number(std::nan(""), false), "nan");
}

}  // namespace
}  // namespace splatsim
