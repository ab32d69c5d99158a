// Copyright 2026 The splatsim Authors
// SPDX-License-Identifier: Apache-2.0

// Experiment driver: a flat `key = value` config, the frame loop over a
// sweep, and CSV / JSON / PPM reports.

#pragma once

#include "splatsim/pipeline.hpp"
#include "splatsim/scene_io.hpp"
#include "splatsim/synth.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace splatsim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string scene_path;
  SyntheticSpec synth;
  std::string traj_path;
  TrajectorySpec traj;
  PipelineConfig pipeline;
  float support_sigma = kSupportSigma;
  /// Also render the all-off baseline per frame and report against it.
  bool baseline = false;
  std::vector<int> sweep_grid_n;
  std::vector<int> sweep_buckets;
  std::vector<int> sweep_block_side;
  std::vector<double> sweep_udt;
  std::vector<MotionMode> sweep_mode;
  std::string output_dir = "out";
  bool write_images = false;
  /// Keys as given, in file order.
  std::vector<std::pair<std::string, std::string>> entries;
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (item.empty()) throw std::invalid_argument("empty list item");
    out.push_back(item);
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw std::invalid_argument("expected a boolean, got '" + v + "'");
}

inline long long parse_int(const std::string& v, long long lo, long long hi) {
  std::size_t used = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw std::invalid_argument("expected an integer, got '" + v + "'");
  if (x < lo || x > hi)
    throw std::invalid_argument("value " + v + " outside [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "]");
  return x;
}

inline double parse_real(const std::string& v, double lo, double hi) {
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(x))
    throw std::invalid_argument("expected a number, got '" + v + "'");
  if (x < lo || x > hi) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "value %s outside [%g, %g]", v.c_str(), lo, hi);
    throw std::invalid_argument(buf);
  }
  return x;
}

inline Vec3f parse_vec3(const std::string& v) {
  const auto items = split_list(v);
  if (items.size() != 3) throw std::invalid_argument("expected three comma-separated numbers");
  const double big = 1e30;
  return Vec3f(static_cast<float>(parse_real(items[0], -big, big)),
               static_cast<float>(parse_real(items[1], -big, big)),
               static_cast<float>(parse_real(items[2], -big, big)));
}

inline MotionMode parse_mode(const std::string& v) {
  if (v == "average") return MotionMode::kAverage;
  if (v == "extreme") return MotionMode::kExtreme;
  if (v == "custom") return MotionMode::kCustom;
  throw std::invalid_argument("expected average|extreme|custom, got '" + v + "'");
}

inline const char* mode_name(MotionMode m) {
  switch (m) {
    case MotionMode::kAverage: return "average";
    case MotionMode::kExtreme: return "extreme";
    case MotionMode::kCustom: return "custom";
  }
  return "?";
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    const double big = 1e30;
    auto integer = [](auto member, long long lo, long long hi) {
      return [=](ExperimentConfig& c, const std::string& v) {
        member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(parse_int(v, lo, hi));
      };
    };
    auto real = [](auto member, double lo, double hi) {
      return [=](ExperimentConfig& c, const std::string& v) {
        member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(parse_real(v, lo, hi));
      };
    };
    auto boolean = [](auto member) {
      return [=](ExperimentConfig& c, const std::string& v) { member(c) = parse_bool(v); };
    };
#define SPLATSIM_FIELD(expr) [](ExperimentConfig & c) -> decltype(auto) { return (expr); }
    t["experiment.name"] = [](ExperimentConfig& c, const std::string& v) { c.name = v; };
    t["experiment.baseline"] = boolean(SPLATSIM_FIELD(c.baseline));

    t["scene.path"] = [](ExperimentConfig& c, const std::string& v) { c.scene_path = v; };
    t["scene.count"] = integer(SPLATSIM_FIELD(c.synth.count), 0, 50'000'000);
    t["scene.extent"] = real(SPLATSIM_FIELD(c.synth.extent), 1e-6, big);
    t["scene.scale"] = real(SPLATSIM_FIELD(c.synth.scale), 1e-9, big);
    t["scene.scale_spread"] = real(SPLATSIM_FIELD(c.synth.scale_spread), 0, 10);
    t["scene.motion"] = real(SPLATSIM_FIELD(c.synth.motion), 0, big);
    t["scene.elongated"] = boolean(SPLATSIM_FIELD(c.synth.elongated));
    t["scene.elongation"] = real(SPLATSIM_FIELD(c.synth.elongation), 1, 1000);
    t["scene.dynamic"] = boolean(SPLATSIM_FIELD(c.synth.dynamic));
    t["scene.temporal_scale"] = real(SPLATSIM_FIELD(c.synth.temporal_scale), 1e-6, big);
    t["scene.distribution"] = [](ExperimentConfig& c, const std::string& v) {
      if (v == "uniform") c.synth.distribution = Distribution::kUniform;
      else if (v == "clustered") c.synth.distribution = Distribution::kClustered;
      else if (v == "skewed") c.synth.distribution = Distribution::kSkewed;
      else throw std::invalid_argument("expected uniform|clustered|skewed, got '" + v + "'");
    };
    t["scene.clusters"] = integer(SPLATSIM_FIELD(c.synth.clusters), 1, 100000);
    t["scene.skew"] = real(SPLATSIM_FIELD(c.synth.skew), 1, 64);
    t["scene.sh_degree"] = integer(SPLATSIM_FIELD(c.synth.sh_degree), 0, kMaxShDegree);
    t["scene.seed"] = integer(SPLATSIM_FIELD(c.synth.seed), 0, std::numeric_limits<long long>::max());

    t["traj.path"] = [](ExperimentConfig& c, const std::string& v) { c.traj_path = v; };
    t["traj.mode"] = [](ExperimentConfig& c, const std::string& v) { c.traj.mode = parse_mode(v); };
    t["traj.rig"] = [](ExperimentConfig& c, const std::string& v) {
      if (v == "orbit") c.traj.rig = Rig::kOrbit;
      else if (v == "pan") c.traj.rig = Rig::kPan;
      else throw std::invalid_argument("expected orbit|pan, got '" + v + "'");
    };
    t["traj.yaw_rate"] = real(SPLATSIM_FIELD(c.traj.yaw_rate), 0, 1e6);
    t["traj.pitch_rate"] = real(SPLATSIM_FIELD(c.traj.pitch_rate), 0, 1e6);
    t["traj.fps"] = real(SPLATSIM_FIELD(c.traj.fps), 1e-3, 1e6);
    t["traj.frames"] = integer(SPLATSIM_FIELD(c.traj.frames), 0, 1'000'000);
    t["traj.yaw0"] = real(SPLATSIM_FIELD(c.traj.yaw0), -1e6, 1e6);
    t["traj.pitch0"] = real(SPLATSIM_FIELD(c.traj.pitch0), -kPitchLimit, kPitchLimit);
    t["traj.center"] = [](ExperimentConfig& c, const std::string& v) { c.traj.center = parse_vec3(v); };
    t["traj.radius"] = real(SPLATSIM_FIELD(c.traj.radius), 1e-6, big);
    t["traj.eye"] = [](ExperimentConfig& c, const std::string& v) { c.traj.eye = parse_vec3(v); };
    t["traj.width"] = integer(SPLATSIM_FIELD(c.traj.width), 1, 16384);
    t["traj.height"] = integer(SPLATSIM_FIELD(c.traj.height), 1, 16384);
    t["traj.focal"] = real(SPLATSIM_FIELD(c.traj.focal), 1e-6, big);
    t["traj.znear"] = real(SPLATSIM_FIELD(c.traj.znear), 1e-9, big);
    t["traj.zfar"] = real(SPLATSIM_FIELD(c.traj.zfar), 1e-9, big);
    t["traj.t0"] = real(SPLATSIM_FIELD(c.traj.t0), 0, 1);
    t["traj.t1"] = real(SPLATSIM_FIELD(c.traj.t1), 0, 1);

    t["pipeline.dr_fc"] = boolean(SPLATSIM_FIELD(c.pipeline.flags.dr_fc));
    t["pipeline.atg"] = boolean(SPLATSIM_FIELD(c.pipeline.flags.atg));
    t["pipeline.aii"] = boolean(SPLATSIM_FIELD(c.pipeline.flags.aii));
    t["pipeline.lut_exp"] = boolean(SPLATSIM_FIELD(c.pipeline.flags.lut_exp));
    t["pipeline.grid_n"] = integer(SPLATSIM_FIELD(c.pipeline.grid_n), 1, 64);
    t["pipeline.buckets"] = integer(SPLATSIM_FIELD(c.pipeline.buckets), 2, 65536);
    t["pipeline.tile_size"] = integer(SPLATSIM_FIELD(c.pipeline.tile_size), 1, 4096);
    t["pipeline.block_side"] = integer(SPLATSIM_FIELD(c.pipeline.block_side), 1, 4096);
    t["pipeline.udt"] = real(SPLATSIM_FIELD(c.pipeline.udt), 0, 1);
    t["pipeline.k"] = integer(SPLATSIM_FIELD(c.pipeline.k), 1, 4);
    t["pipeline.max_group"] = integer(SPLATSIM_FIELD(c.pipeline.max_group), 0, 1 << 24);
    t["pipeline.max_group_cap"] = integer(SPLATSIM_FIELD(c.pipeline.max_group_cap), 1, 1 << 24);
    t["pipeline.strength_cap"] = integer(SPLATSIM_FIELD(c.pipeline.strength_cap), 1, 1 << 24);
    t["pipeline.term_eps"] = real(SPLATSIM_FIELD(c.pipeline.term_eps), 0, 1);
    t["pipeline.quantize16"] = boolean(SPLATSIM_FIELD(c.pipeline.quantize16));
    t["pipeline.tight_footprint"] = boolean(SPLATSIM_FIELD(c.pipeline.tight_footprint));
    t["pipeline.buffer_bytes"] = integer(SPLATSIM_FIELD(c.pipeline.buffer_bytes), 1, 1LL << 40);
    t["pipeline.burst_bytes"] = integer(SPLATSIM_FIELD(c.pipeline.burst_bytes), 1, 1 << 20);
    t["pipeline.lut_precision"] = [](ExperimentConfig& c, const std::string& v) {
      if (v == "exact") c.pipeline.lut_precision = LutPrecision::kExact;
      else if (v == "half") c.pipeline.lut_precision = LutPrecision::kHalf;
      else throw std::invalid_argument("expected exact|half, got '" + v + "'");
    };
    t["pipeline.threads"] = integer(SPLATSIM_FIELD(c.pipeline.threads), 0, 4096);
    t["pipeline.background"] = [](ExperimentConfig& c, const std::string& v) {
      c.pipeline.background = parse_vec3(v);
    };
    t["pipeline.guard_px"] = real(SPLATSIM_FIELD(c.pipeline.guard_px), 0, 1e6);
    t["pipeline.support_sigma"] = real(SPLATSIM_FIELD(c.support_sigma), 0.1, 100);
    t["energy.dram_pj_per_byte"] = real(SPLATSIM_FIELD(c.pipeline.energy.dram_pj_per_byte), 0, big);
    t["energy.sram_pj_per_byte"] = real(SPLATSIM_FIELD(c.pipeline.energy.sram_pj_per_byte), 0, big);

    t["sweep.grid_n"] = [](ExperimentConfig& c, const std::string& v) {
      c.sweep_grid_n.clear();
      for (const auto& s : split_list(v)) c.sweep_grid_n.push_back(static_cast<int>(parse_int(s, 1, 64)));
    };
    t["sweep.buckets"] = [](ExperimentConfig& c, const std::string& v) {
      c.sweep_buckets.clear();
      for (const auto& s : split_list(v)) {
        const int n = static_cast<int>(parse_int(s, 2, 65536));
        if (!is_valid_bucket_count(n)) throw std::invalid_argument("bucket count " + s + " is not a power of two");
        c.sweep_buckets.push_back(n);
      }
    };
    t["sweep.block_side"] = [](ExperimentConfig& c, const std::string& v) {
      c.sweep_block_side.clear();
      for (const auto& s : split_list(v)) c.sweep_block_side.push_back(static_cast<int>(parse_int(s, 1, 4096)));
    };
    t["sweep.udt"] = [](ExperimentConfig& c, const std::string& v) {
      c.sweep_udt.clear();
      for (const auto& s : split_list(v)) c.sweep_udt.push_back(parse_real(s, 0, 1));
    };
    t["sweep.mode"] = [](ExperimentConfig& c, const std::string& v) {
      c.sweep_mode.clear();
      for (const auto& s : split_list(v)) c.sweep_mode.push_back(parse_mode(s));
    };
    t["output.dir"] = [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; };
    t["output.images"] = boolean(SPLATSIM_FIELD(c.write_images));
#undef SPLATSIM_FIELD
    return t;
  }();
  return table;
}

}  // namespace config_detail

/// Every recognized config key, sorted.
inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, v] : config_detail::setters()) keys.push_back(k);
  return keys;
}

/// Applies one `key = value` assignment; errors name the key.
inline void apply_config_entry(ExperimentConfig& c, const std::string& key, const std::string& value) {
  const auto& table = config_detail::setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError(key + ": unknown key");
  try {
    it->second(c, value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key + ": " + e.what());
  }
  c.entries.emplace_back(key, value);
}

/// Cross-field checks run after all entries are applied.
inline void finalize_config(ExperimentConfig& c, const std::string& source = "config") {
  auto fail = [&](const std::string& key, const std::string& m) {
    throw ConfigError(source + ": " + key + ": " + m);
  };
  if (!is_valid_bucket_count(c.pipeline.buckets)) fail("pipeline.buckets", "must be a power of two");
  if (!(c.traj.znear < c.traj.zfar)) fail("traj.znear", "must be below traj.zfar");
  if (!c.traj_path.empty() && !c.sweep_mode.empty())
    fail("sweep.mode", "cannot sweep motion modes over a trajectory file");
  if (c.output_dir.empty()) fail("output.dir", "must not be empty");
}

inline ExperimentConfig parse_config(const std::string& text, const std::string& source = "config") {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = config_detail::trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = config_detail::trim(line.substr(0, eq));
    const std::string value = config_detail::trim(line.substr(eq + 1));
    try {
      apply_config_entry(c, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  finalize_config(c, source);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  return parse_config(read_text_file(path), path);
}

/// One column of the per-frame report.
struct MetricField {
  const char* name;
  bool integral;
  double (*get)(const FrameMetrics&);
};

inline const std::vector<MetricField>& metric_fields() {
  using M = FrameMetrics;
  static const std::vector<MetricField> fields = {
      {"t", false, [](const M& m) { return double(m.t); }},
      {"scene_size", true, [](const M& m) { return double(m.scene_size); }},
      {"fetched", true, [](const M& m) { return double(m.fetched); }},
      {"temporally_culled", true, [](const M& m) { return double(m.temporally_culled); }},
      {"frustum_culled", true, [](const M& m) { return double(m.frustum_culled); }},
      {"splatted", true, [](const M& m) { return double(m.splatted); }},
      {"block_entries", true, [](const M& m) { return double(m.block_entries); }},
      {"tile_entries", true, [](const M& m) { return double(m.tile_entries); }},
      {"visible_cells", true, [](const M& m) { return double(m.visible_cells); }},
      {"fetch_ranges", true, [](const M& m) { return double(m.fetch_ranges); }},
      {"duplicates_skipped", true, [](const M& m) { return double(m.duplicates_skipped); }},
      {"fetch_records", true, [](const M& m) { return double(m.fetch.records); }},
      {"fetch_bursts", true, [](const M& m) { return double(m.fetch.bursts); }},
      {"fetch_bytes", true, [](const M& m) { return double(m.fetch.bytes); }},
      {"refetch_records", true, [](const M& m) { return double(m.refetch.records); }},
      {"refetch_bursts", true, [](const M& m) { return double(m.refetch.bursts); }},
      {"refetch_bytes", true, [](const M& m) { return double(m.refetch.bytes); }},
      {"buffer_lookups", true, [](const M& m) { return double(m.buffer.lookups); }},
      {"buffer_hits", true, [](const M& m) { return double(m.buffer.hits); }},
      {"buffer_misses", true, [](const M& m) { return double(m.buffer.misses); }},
      {"buffer_evictions", true, [](const M& m) { return double(m.buffer.evictions); }},
      {"sort_scatter_ops", true, [](const M& m) { return double(m.sort.scatter_ops); }},
      {"sort_range_scans", true, [](const M& m) { return double(m.sort.range_scans); }},
      {"sort_compare_exchanges", true, [](const M& m) { return double(m.sort.compare_exchanges); }},
      {"sort_stages", true, [](const M& m) { return double(m.sort.stages); }},
      {"sort_max_bucket", true, [](const M& m) { return double(m.sort.max_bucket); }},
      {"sort_critical_stages", true, [](const M& m) { return double(m.sort.critical_stages); }},
      {"sort_critical_compare_exchanges", true,
       [](const M& m) { return double(m.sort.critical_compare_exchanges); }},
      {"sorted_blocks", true, [](const M& m) { return double(m.sorted_blocks); }},
      {"threshold", false, [](const M& m) { return m.threshold; }},
      {"deform_count", true, [](const M& m) { return double(m.deform_count); }},
      {"regrouped_blocks", true, [](const M& m) { return double(m.regrouped_blocks); }},
      {"group_count", true, [](const M& m) { return double(m.group_count); }},
      {"max_group", true, [](const M& m) { return double(m.max_group); }},
      {"full_regroup", true, [](const M& m) { return m.full_regroup ? 1.0 : 0.0; }},
      {"dram_energy_pj", false, [](const M& m) { return m.dram_energy_pj; }},
      {"sram_energy_pj", false, [](const M& m) { return m.sram_energy_pj; }},
      {"psnr_db", false, [](const M& m) { return m.psnr_db; }},
  };
  return fields;
}

inline std::string format_number(double v, bool integral) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  if (integral)
    std::snprintf(buf, sizeof buf, "%.0f", v);
  else
    std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// JSON value of a metric: a number when finite, else "inf", "-inf" or "nan".
inline nlohmann::ordered_json json_number(double v, bool integral) {
  if (!std::isfinite(v)) return format_number(v, integral);
  if (integral) return static_cast<std::int64_t>(std::llround(v));
  return v;
}

struct SweepPoint {
  int grid_n = 4;
  int buckets = 8;
  int block_side = 4;
  double udt = 0.5;
  MotionMode mode = MotionMode::kAverage;
};

struct FrameRow {
  std::size_t point = 0;
  int frame = 0;
  FrameMetrics metrics;
  std::optional<FrameMetrics> baseline;
  double max_abs_diff = std::numeric_limits<double>::quiet_NaN();
};

struct ExperimentResult {
  std::vector<SweepPoint> points;
  std::vector<FrameRow> rows;
  std::string frames_csv;
  std::string summary_csv;
  std::string summary_json;
};

/// Cartesian product of the sweep lists in a fixed nesting order.
inline std::vector<SweepPoint> sweep_points(const ExperimentConfig& c) {
  auto or_default = [](auto list, auto value) {
    if (list.empty()) list.push_back(value);
    return list;
  };
  const auto grids = or_default(c.sweep_grid_n, c.pipeline.grid_n);
  const auto buckets = or_default(c.sweep_buckets, c.pipeline.buckets);
  const auto sides = or_default(c.sweep_block_side, c.pipeline.block_side);
  const auto udts = or_default(c.sweep_udt, c.pipeline.udt);
  const auto modes = or_default(c.sweep_mode, c.traj.mode);
  std::vector<SweepPoint> out;
  for (MotionMode mode : modes)
    for (int g : grids)
      for (int n : buckets)
        for (int s : sides)
          for (double u : udts) out.push_back({g, n, s, u, mode});
  return out;
}

namespace experiment_detail {

inline std::string point_prefix(const SweepPoint& p) {
  return std::to_string(p.grid_n) + "," + std::to_string(p.buckets) + "," +
         std::to_string(p.block_side) + "," + format_number(p.udt, false) + "," +
         config_detail::mode_name(p.mode);
}

inline std::string point_label(const SweepPoint& p, std::size_t index) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "p%03zu_g%d_n%d_b%d", index, p.grid_n, p.buckets, p.block_side);
  return buf;
}

inline double ratio(double num, double den) {
  return den > 0 ? num / den : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace experiment_detail

/// Runs every sweep point over the trajectory. Reports are returned and,
/// when `write` is set, written to the output directory.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write = true) {
  using namespace experiment_detail;
  ExperimentResult res;
  LoadedScene scene;
  if (!cfg.scene_path.empty()) {
    scene = load_scene(cfg.scene_path);
  } else {
    scene.gaussians = gen_synthetic(cfg.synth);
    scene.sh_degree = cfg.synth.sh_degree;
    scene.dynamic = cfg.synth.dynamic;
  }
  std::optional<Trajectory> fixed_traj;
  if (!cfg.traj_path.empty()) fixed_traj = parse_trajectory_csv(read_text_file(cfg.traj_path));

  res.points = sweep_points(cfg);
  std::map<int, GridLayout> layouts;
  auto layout_for = [&](int grid_n) -> const GridLayout* {
    if (scene.gaussians.empty()) return nullptr;
    if (scene.layout && scene.layout->grid_n == grid_n) return &*scene.layout;
    auto it = layouts.find(grid_n);
    if (it == layouts.end())
      it = layouts.emplace(grid_n, build_layout(scene.gaussians, grid_n, cfg.support_sigma)).first;
    return &it->second;
  };
  if (write && cfg.write_images) std::filesystem::create_directories(cfg.output_dir);

  for (std::size_t pi = 0; pi < res.points.size(); ++pi) {
    const SweepPoint& p = res.points[pi];
    PipelineConfig pc = cfg.pipeline;
    pc.grid_n = p.grid_n;
    pc.buckets = p.buckets;
    pc.block_side = p.block_side;
    pc.udt = p.udt;
    pc.sh_degree = scene.sh_degree;
    PipelineConfig base = pc;
    base.flags = PipelineFlags{};
    Trajectory traj;
    if (fixed_traj) {
      traj = *fixed_traj;
    } else {
      TrajectorySpec ts = cfg.traj;
      ts.mode = p.mode;
      traj = gen_trajectory(ts);
    }
    SceneRef ref{scene.gaussians, pc.flags.dr_fc ? layout_for(p.grid_n) : nullptr};
    if (pc.flags.dr_fc && !ref.layout) {
      // An empty scene has no layout; the plain fetch path gives the same
      // (empty) result.
      pc.flags.dr_fc = false;
    }
    PosterioriState state, base_state;
    for (std::size_t f = 0; f < traj.size(); ++f) {
      FrameRow row;
      row.point = pi;
      row.frame = static_cast<int>(f);
      FrameResult r = render_frame(ref, traj[f].camera, traj[f].t, state, pc);
      std::optional<FrameResult> b;
      if (cfg.baseline) {
        b = render_frame({scene.gaussians, nullptr}, traj[f].camera, traj[f].t, base_state, base);
        r.metrics.psnr_db = psnr(r.image, b->image);
        row.max_abs_diff = max_abs_diff(r.image, b->image);
        row.baseline = b->metrics;
      }
      row.metrics = r.metrics;
      if (write && cfg.write_images) {
        char name[64];
        std::snprintf(name, sizeof name, "_f%04zu.ppm", f);
        const auto stem = std::filesystem::path(cfg.output_dir) / point_label(p, pi);
        write_ppm(stem.string() + name, r.image);
        if (b) write_ppm(stem.string() + "_base" + name, b->image);
      }
      res.rows.push_back(std::move(row));
    }
  }

  // frames.csv
  const auto& fields = metric_fields();
  std::string csv = "grid_n,buckets,block_side,udt,mode,frame";
  for (const auto& fd : fields) csv += std::string(",") + fd.name;
  if (cfg.baseline) {
    for (const auto& fd : fields)
      if (std::string(fd.name) != "psnr_db") csv += std::string(",base_") + fd.name;
    csv += ",max_abs_diff";
  }
  csv += "\n";
  for (const FrameRow& row : res.rows) {
    csv += point_prefix(res.points[row.point]) + "," + std::to_string(row.frame);
    for (const auto& fd : fields) csv += "," + format_number(fd.get(row.metrics), fd.integral);
    if (cfg.baseline) {
      for (const auto& fd : fields)
        if (std::string(fd.name) != "psnr_db")
          csv += "," + format_number(fd.get(*row.baseline), fd.integral);
      csv += "," + format_number(row.max_abs_diff, false);
    }
    csv += "\n";
  }
  res.frames_csv = std::move(csv);

  // Aggregates: integral fields are summed, real fields averaged.
  nlohmann::ordered_json json;
  json["name"] = cfg.name;
  nlohmann::ordered_json echo = nlohmann::ordered_json::object();
  for (const auto& [k, v] : cfg.entries) echo[k] = v;
  json["config"] = echo;
  json["points"] = nlohmann::ordered_json::array();
  std::string summary = "grid_n,buckets,block_side,udt,mode,frames";
  for (const auto& fd : fields) summary += "," + std::string(fd.name) + (fd.integral ? "_sum" : "_mean");
  if (cfg.baseline)
    summary += ",fetch_ratio,miss_ratio,stage_ratio,critical_stage_ratio,critical_ce_ratio,min_psnr_db,max_abs_diff";
  summary += "\n";
  for (std::size_t pi = 0; pi < res.points.size(); ++pi) {
    std::vector<const FrameRow*> rows;
    for (const auto& r : res.rows)
      if (r.point == pi) rows.push_back(&r);
    auto aggregate = [&](const MetricField& fd, bool use_base) {
      double s = 0;
      for (const FrameRow* r : rows) s += fd.get(use_base ? *r->baseline : r->metrics);
      if (!fd.integral && !rows.empty()) s /= static_cast<double>(rows.size());
      return s;
    };
    const SweepPoint& p = res.points[pi];
    nlohmann::ordered_json jp;
    jp["grid_n"] = p.grid_n;
    jp["buckets"] = p.buckets;
    jp["block_side"] = p.block_side;
    jp["udt"] = p.udt;
    jp["mode"] = config_detail::mode_name(p.mode);
    jp["frames"] = rows.size();
    summary += point_prefix(p) + "," + std::to_string(rows.size());
    nlohmann::ordered_json jm = nlohmann::ordered_json::object();
    for (const auto& fd : fields) {
      double v = aggregate(fd, false);
      if (std::string(fd.name) == "psnr_db") {
        v = std::numeric_limits<double>::infinity();
        if (rows.empty() || !cfg.baseline) v = std::numeric_limits<double>::quiet_NaN();
        for (const FrameRow* r : rows) v = std::min(v, r->metrics.psnr_db);
      }
      summary += "," + format_number(v, fd.integral);
      const char* suffix = fd.integral ? "_sum" : std::string(fd.name) == "psnr_db" ? "_min" : "_mean";
      jm[std::string(fd.name) + suffix] = json_number(v, fd.integral);
    }
    jp["metrics"] = jm;
    if (cfg.baseline) {
      auto sum_of = [&](const char* name, bool use_base) {
        for (const auto& fd : fields)
          if (std::string(fd.name) == name) return aggregate(fd, use_base);
        return 0.0;
      };
      double min_psnr = std::numeric_limits<double>::infinity(), max_diff = 0;
      for (const FrameRow* r : rows) {
        min_psnr = std::min(min_psnr, r->metrics.psnr_db);
        max_diff = std::max(max_diff, r->max_abs_diff);
      }
      const std::vector<std::pair<const char*, double>> ratios = {
          {"fetch_ratio", ratio(sum_of("fetch_records", true), sum_of("fetch_records", false))},
          {"miss_ratio", ratio(sum_of("buffer_misses", true), sum_of("buffer_misses", false))},
          {"stage_ratio", ratio(sum_of("sort_stages", true), sum_of("sort_stages", false))},
          {"critical_stage_ratio",
           ratio(sum_of("sort_critical_stages", true), sum_of("sort_critical_stages", false))},
          {"critical_ce_ratio", ratio(sum_of("sort_critical_compare_exchanges", true),
                                      sum_of("sort_critical_compare_exchanges", false))},
          {"min_psnr_db", min_psnr},
          {"max_abs_diff", max_diff},
      };
      nlohmann::ordered_json jr = nlohmann::ordered_json::object();
      for (const auto& [k, v] : ratios) {
        summary += "," + format_number(v, false);
        jr[k] = json_number(v, false);
      }
      jp["baseline"] = jr;
    }
    summary += "\n";
    json["points"].push_back(jp);
  }
  res.summary_csv = std::move(summary);
  res.summary_json = json.dump(2) + "\n";

  if (write) {
    std::filesystem::create_directories(cfg.output_dir);
    const std::filesystem::path dir(cfg.output_dir);
    write_text_file((dir / "frames.csv").string(), res.frames_csv);
    write_text_file((dir / "summary.csv").string(), res.summary_csv);
    write_text_file((dir / "summary.json").string(), res.summary_json);
  }
  return res;
}

}  // namespace splatsim
