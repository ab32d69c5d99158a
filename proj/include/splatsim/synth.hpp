// Copyright 2026 The splatsim Authors
// SPDX-License-Identifier: Apache-2.0

// Seeded synthetic scenes and head-motion camera trajectories.

#pragma once

#include "splatsim/gauss4d.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace splatsim {

enum class Distribution { kUniform, kClustered, kSkewed };

struct SyntheticSpec {
  std::size_t count = 10000;
  /// Positions fill the cube [-extent, extent]³.
  float extent = 4.0f;
  /// Median spatial standard deviation.
  float scale = 0.05f;
  /// Log-normal spread of the per-axis scales.
  float scale_spread = 0.4f;
  /// Speed in scene units per unit of normalized time.
  float motion = 0.5f;
  /// Stretch splats along world y by `elongation`.
  bool elongated = false;
  float elongation = 6.0f;
  bool dynamic = true;
  /// Median temporal standard deviation.
  float temporal_scale = 0.15f;
  Distribution distribution = Distribution::kUniform;
  int clusters = 8;
  /// Depth exponent of the skewed distribution; larger piles more mass at -z.
  float skew = 3.0f;
  int sh_degree = 1;
  std::uint64_t seed = 1;
};

namespace synth_detail {

inline Mat3f random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  Eigen::Quaternionf q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

}  // namespace synth_detail

/// Each Gaussian moves linearly: x(t) = x0 + v·(t - mu_t). Its 4D
/// covariance is that of (x0 + v·τ + e, mu_t + τ) with τ ~ N(0, σ_t²) and
/// e ~ N(0, Σ_s), so slicing yields mean x0 + v·(t - mu_t) and covariance Σ_s.
inline std::vector<Gaussian4D<float>> gen_synthetic(const SyntheticSpec& spec) {
  if (spec.sh_degree < 0 || spec.sh_degree > kMaxShDegree)
    throw std::invalid_argument("gen_synthetic: sh_degree must lie in [0, 3]");
  if (!(spec.extent > 0 && spec.scale > 0 && spec.temporal_scale > 0 && spec.skew > 0))
    throw std::invalid_argument("gen_synthetic: extent and scales must be positive");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  std::uniform_real_distribution<float> sym(-1.0f, 1.0f);
  std::normal_distribution<float> normal(0.0f, 1.0f);

  std::vector<Vec3f> centers(static_cast<std::size_t>(std::max(spec.clusters, 1)));
  for (auto& c : centers) c = Vec3f(sym(rng), sym(rng), sym(rng)) * (0.7f * spec.extent);

  std::vector<Gaussian4D<float>> out(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    Gaussian4D<float>& g = out[i];
    g.id = static_cast<std::uint32_t>(i);
    Vec3f p;
    switch (spec.distribution) {
      case Distribution::kUniform:
        p = Vec3f(sym(rng), sym(rng), sym(rng)) * spec.extent;
        break;
      case Distribution::kClustered: {
        const Vec3f& c = centers[static_cast<std::size_t>(rng() % centers.size())];
        p = c + Vec3f(normal(rng), normal(rng), normal(rng)) * (0.12f * spec.extent);
        p = p.cwiseMax(-spec.extent).cwiseMin(spec.extent);
        break;
      }
      case Distribution::kSkewed: {
        // Density falls off away from the -z face.
        const float u = unit(rng);
        p = Vec3f(sym(rng) * spec.extent, sym(rng) * spec.extent,
                  spec.extent * (2.0f * std::pow(u, spec.skew) - 1.0f));
        break;
      }
    }

    Vec3f s;
    for (int a = 0; a < 3; ++a) s(a) = spec.scale * std::exp(spec.scale_spread * normal(rng));
    Mat3f rot;
    if (spec.elongated) {
      s(1) = s(0) * spec.elongation;
      s(2) = s(0);
      rot = Mat3f::Identity();
    } else {
      rot = synth_detail::random_rotation(rng);
    }
    const Mat3f cov_s = rot * s.cwiseProduct(s).asDiagonal() * rot.transpose();

    const float mu_t = unit(rng);
    const float sigma_t = spec.temporal_scale * (0.5f + unit(rng));
    const Vec3f v = Vec3f(normal(rng), normal(rng), normal(rng)) * (spec.motion / std::sqrt(3.0f));
    g.cov = Mat4f::Zero();
    if (spec.dynamic) {
      g.mean = Vec4f(p(0), p(1), p(2), mu_t);
      const float st2 = sigma_t * sigma_t;
      g.cov.topLeftCorner<3, 3>() = cov_s + v * v.transpose() * st2;
      g.cov.block<3, 1>(0, 3) = v * st2;
      g.cov.block<1, 3>(3, 0) = (v * st2).transpose();
      g.cov(3, 3) = st2;
    } else {
      g.mean = Vec4f(p(0), p(1), p(2), 0.5f);
      g.cov.topLeftCorner<3, 3>() = cov_s;
      g.cov(3, 3) = std::numeric_limits<float>::infinity();
    }
    g.cov.topLeftCorner<3, 3>() =
        ((g.cov.topLeftCorner<3, 3>() + g.cov.topLeftCorner<3, 3>().transpose()) * 0.5f).eval();

    g.opacity = 0.35f + 0.6f * unit(rng);
    g.sh.assign(static_cast<std::size_t>(sh_coeff_count(spec.sh_degree)), Vec3f::Zero());
    const float c0 = static_cast<float>(sh_detail::kC0);
    for (int ch = 0; ch < 3; ++ch) g.sh[0](ch) = (0.1f + 0.8f * unit(rng) - 0.5f) / c0;
    for (std::size_t k = 1; k < g.sh.size(); ++k)
      for (int ch = 0; ch < 3; ++ch) g.sh[k](ch) = 0.08f * sym(rng);
  }
  return out;
}

/// Pose rig. Orbit cameras circle a centre and look at it; pan cameras sit
/// at a fixed eye and turn in place.
enum class Rig { kOrbit, kPan };
enum class MotionMode { kAverage, kExtreme, kCustom };

/// Head-motion rates in degrees per second.
inline constexpr double kAverageYawRate = 27.6;
inline constexpr double kAveragePitchRate = 14.8;
inline constexpr double kExtremeRate = 180.0;
inline constexpr double kPitchLimit = 85.0;

struct TrajectorySpec {
  MotionMode mode = MotionMode::kAverage;
  Rig rig = Rig::kOrbit;
  double yaw_rate = kAverageYawRate;  ///< used in kCustom mode
  double pitch_rate = kAveragePitchRate;
  double fps = 30.0;
  int frames = 30;
  double yaw0 = 0.0, pitch0 = 0.0;  ///< degrees
  Vec3f center = Vec3f::Zero();
  float radius = 12.0f;  ///< orbit distance
  Vec3f eye = Vec3f::Zero();  ///< pan position
  int width = 256, height = 256;
  float focal = 256.0f;
  float znear = 0.1f, zfar = 100.0f;
  float t0 = 0.0f, t1 = 1.0f;
};

struct TrajectoryFrame {
  Camera<float> camera;
  float t = 0;
};

using Trajectory = std::vector<TrajectoryFrame>;

/// Per-frame (yaw, pitch) increments in degrees.
inline std::pair<double, double> trajectory_step(const TrajectorySpec& s) {
  if (!(s.fps > 0)) throw std::invalid_argument("trajectory: fps must be positive");
  switch (s.mode) {
    case MotionMode::kAverage: return {kAverageYawRate / s.fps, kAveragePitchRate / s.fps};
    case MotionMode::kExtreme: return {kExtremeRate / s.fps, kExtremeRate / s.fps};
    case MotionMode::kCustom: break;
  }
  if (s.yaw_rate < 0 || s.pitch_rate < 0)
    throw std::invalid_argument("trajectory: rates must be non-negative");
  return {s.yaw_rate / s.fps, s.pitch_rate / s.fps};
}

/// Camera at `eye` looking along `forward`; image y follows world +y.
inline Camera<float> look_camera(const Vec3f& eye, const Vec3f& forward, const TrajectorySpec& s) {
  const Vec3f z = forward.normalized();
  Vec3f x = Vec3f::UnitY().cross(z);
  if (x.norm() < 1e-6f) x = Vec3f::UnitX();
  x.normalize();
  const Vec3f y = z.cross(x);
  Camera<float> cam;
  cam.rotation.row(0) = x.transpose();
  cam.rotation.row(1) = y.transpose();
  cam.rotation.row(2) = z.transpose();
  cam.translation = -(cam.rotation * eye);
  cam.fx = cam.fy = s.focal;
  cam.cx = static_cast<float>(s.width) / 2;
  cam.cy = static_cast<float>(s.height) / 2;
  cam.width = s.width;
  cam.height = s.height;
  cam.znear = s.znear;
  cam.zfar = s.zfar;
  return cam;
}

inline Trajectory gen_trajectory(const TrajectorySpec& s) {
  if (s.frames < 0) throw std::invalid_argument("trajectory: frames must be >= 0");
  const auto [dyaw, dpitch] = trajectory_step(s);
  Trajectory out;
  out.reserve(static_cast<std::size_t>(s.frames));
  const double deg = std::numbers::pi / 180.0;
  for (int k = 0; k < s.frames; ++k) {
    const double yaw = (s.yaw0 + k * dyaw) * deg;
    const double pitch = std::clamp(s.pitch0 + k * dpitch, -kPitchLimit, kPitchLimit) * deg;
    // Unit vector for (yaw, pitch); pitch up is world -y.
    const Vec3f dir(static_cast<float>(std::cos(pitch) * std::sin(yaw)),
                    static_cast<float>(-std::sin(pitch)),
                    static_cast<float>(std::cos(pitch) * std::cos(yaw)));
    TrajectoryFrame f;
    if (s.rig == Rig::kOrbit) {
      const Vec3f eye = s.center - dir * s.radius;
      f.camera = look_camera(eye, s.center - eye, s);
    } else {
      f.camera = look_camera(s.eye, dir, s);
    }
    f.t = s.frames > 1 ? s.t0 + (s.t1 - s.t0) * static_cast<float>(k) / (s.frames - 1) : s.t0;
    out.push_back(f);
  }
  return out;
}

inline constexpr const char* kTrajectoryHeader =
    "frame,t,r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz,fx,fy,cx,cy,width,height,znear,zfar";

/// One row per frame; floats printed with 9 significant digits, enough to
/// round-trip binary32 exactly.
inline std::string trajectory_csv(const Trajectory& traj) {
  std::string out = std::string(kTrajectoryHeader) + "\n";
  char buf[64];
  auto put = [&](float v) {
    std::snprintf(buf, sizeof buf, ",%.9g", static_cast<double>(v));
    out += buf;
  };
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const auto& c = traj[k].camera;
    out += std::to_string(k);
    put(traj[k].t);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) put(c.rotation(i, j));
    for (int i = 0; i < 3; ++i) put(c.translation(i));
    put(c.fx);
    put(c.fy);
    put(c.cx);
    put(c.cy);
    out += "," + std::to_string(c.width) + "," + std::to_string(c.height);
    put(c.znear);
    put(c.zfar);
    out += "\n";
  }
  return out;
}

inline Trajectory parse_trajectory_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kTrajectoryHeader)
    throw std::runtime_error("trajectory csv: unexpected header");
  Trajectory traj;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 22)
      throw std::runtime_error("trajectory csv line " + std::to_string(lineno) +
                               ": expected 22 fields");
    try {
      auto f = [&](int i) {
        const std::string& c = cells[static_cast<std::size_t>(i)];
        char* end = nullptr;
        const float v = std::strtof(c.c_str(), &end);
        if (c.empty() || *end != '\0') throw std::invalid_argument("bad number '" + c + "'");
        return v;
      };
      TrajectoryFrame fr;
      fr.t = f(1);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) fr.camera.rotation(i, j) = f(2 + 3 * i + j);
      for (int i = 0; i < 3; ++i) fr.camera.translation(i) = f(11 + i);
      fr.camera.fx = f(14);
      fr.camera.fy = f(15);
      fr.camera.cx = f(16);
      fr.camera.cy = f(17);
      fr.camera.width = std::stoi(cells[18]);
      fr.camera.height = std::stoi(cells[19]);
      fr.camera.znear = f(20);
      fr.camera.zfar = f(21);
      validate_camera(fr.camera);
      traj.push_back(fr);
    } catch (const std::exception& e) {
      throw std::runtime_error("trajectory csv line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return traj;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace splatsim
