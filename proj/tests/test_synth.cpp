// Copyright 2026 The splatsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "splatsim/synth.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace splatsim {
namespace {

bool same_scene(const std::vector<Gaussian4D<float>>& a, const std::vector<Gaussian4D<float>>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].mean != b[i].mean || a[i].cov != b[i].cov || a[i].sh != b[i].sh ||
        a[i].opacity != b[i].opacity)
      return false;
  return true;
}

TEST(GenSynthetic, DeterministicPerSeed) {
  SyntheticSpec s;
  s.count = 500;
  for (auto d : {Distribution::kUniform, Distribution::kClustered, Distribution::kSkewed}) {
    s.distribution = d;
    s.seed = 3;
    const auto a = gen_synthetic(s), b = gen_synthetic(s);
    EXPECT_TRUE(same_scene(a, b));
    s.seed = 4;
    EXPECT_FALSE(same_scene(a, gen_synthetic(s)));
  }
}

TEST(GenSynthetic, AllGaussiansValidAndInBounds) {
  SyntheticSpec s;
  s.count = 2000;
  for (auto d : {Distribution::kUniform, Distribution::kClustered, Distribution::kSkewed})
    for (bool dynamic : {true, false})
      for (int deg : {0, 1, 3}) {
        s.distribution = d;
        s.dynamic = dynamic;
        s.sh_degree = deg;
        const auto scene = gen_synthetic(s);
        for (std::size_t i = 0; i < scene.size(); ++i) {
          ASSERT_NO_THROW(validate_gaussian(scene[i]));
          ASSERT_EQ(scene[i].id, i);
          ASSERT_LE(scene[i].mean.head<3>().cwiseAbs().maxCoeff(), s.extent);
          ASSERT_EQ(scene[i].is_static(), !dynamic);
        }
      }
}

TEST(GenSynthetic, SlicedMotionIsLinearWithConstantShape) {
  SyntheticSpec s;
  s.count = 200;
  for (const auto& g : gen_synthetic(s)) {
    const auto a = slice_at_time(g, 0.2f), b = slice_at_time(g, 0.5f), c = slice_at_time(g, 0.8f);
    EXPECT_LT(((b.mean - a.mean) - (c.mean - b.mean)).norm(), 1e-4f);
    EXPECT_LT((a.cov - c.cov).cwiseAbs().maxCoeff(), 1e-5f);
  }
}

TEST(GenSynthetic, ElongatedSplatsAreTallOnScreen) {
  SyntheticSpec s;
  s.count = 300;
  s.elongated = true;
  TrajectorySpec ts;
  ts.frames = 1;
  const Camera<float> cam = gen_trajectory(ts).front().camera;
  std::vector<float> ratios;
  for (const auto& g : gen_synthetic(s)) {
    const auto p = project(slice_at_time(g, 0.5f), cam);
    if (p) ratios.push_back(std::sqrt(p->geometry.cov(1, 1) / p->geometry.cov(0, 0)));
  }
  ASSERT_GT(ratios.size(), 250u);
  std::nth_element(ratios.begin(), ratios.begin() + ratios.size() / 2, ratios.end());
  EXPECT_GE(ratios[ratios.size() / 2], 4.0f);
}

TEST(GenSynthetic, RejectsBadSpecs) {
  SyntheticSpec s;
  s.sh_degree = 4;
  EXPECT_THROW(gen_synthetic(s), std::invalid_argument);
  s = {};
  s.scale = 0;
  EXPECT_THROW(gen_synthetic(s), std::invalid_argument);
}

TEST(Trajectory, StepsPerMode) {
  TrajectorySpec s;
  auto [y, p] = trajectory_step(s);
  EXPECT_NEAR(y, 0.92, 1e-12);
  EXPECT_NEAR(p, 0.493333333333, 1e-9);
  s.mode = MotionMode::kExtreme;
  std::tie(y, p) = trajectory_step(s);
  EXPECT_DOUBLE_EQ(y, 6.0);
  EXPECT_DOUBLE_EQ(p, 6.0);
  s.mode = MotionMode::kCustom;
  s.yaw_rate = 60;
  s.pitch_rate = 0;
  s.fps = 60;
  std::tie(y, p) = trajectory_step(s);
  EXPECT_DOUBLE_EQ(y, 1.0);
  EXPECT_DOUBLE_EQ(p, 0.0);
  s.fps = 0;
  EXPECT_THROW(trajectory_step(s), std::invalid_argument);
}

TEST(Trajectory, OrbitLooksAtCentreWithYDown) {
  TrajectorySpec s;
  s.frames = 40;
  s.mode = MotionMode::kExtreme;
  const auto traj = gen_trajectory(s);
  ASSERT_EQ(traj.size(), 40u);
  EXPECT_FLOAT_EQ(traj.front().t, 0.0f);
  EXPECT_FLOAT_EQ(traj.back().t, 1.0f);
  for (const auto& f : traj) {
    const Vec3f c = f.camera.to_camera(s.center);
    EXPECT_NEAR(c(0), 0.0f, 1e-4f);
    EXPECT_NEAR(c(1), 0.0f, 1e-4f);
    EXPECT_NEAR(c(2), s.radius, 1e-3f);
    EXPECT_NEAR((f.camera.position() - s.center).norm(), s.radius, 1e-3f);
    // Pitch is clamped, so the camera never reaches the pole.
    EXPECT_LT(std::abs(f.camera.position()(1)), s.radius * std::sin(85.01 * 3.14159265 / 180));
  }
  const Camera<float>& cam = traj.front().camera;
  EXPECT_GT(cam.to_camera(Vec3f(0, 1, 0))(1), cam.to_camera(Vec3f(0, 0, 0))(1));
}

TEST(Trajectory, PanRigRotatesInPlace) {
  TrajectorySpec s;
  s.rig = Rig::kPan;
  s.eye = Vec3f(0.5f, 0.0f, -1.0f);
  s.frames = 10;
  for (const auto& f : gen_trajectory(s))
    EXPECT_LT((f.camera.position() - s.eye).norm(), 1e-5f);
}

TEST(Trajectory, CsvRoundTripIsExact) {
  TrajectorySpec s;
  s.frames = 12;
  s.mode = MotionMode::kExtreme;
  const auto traj = gen_trajectory(s);
  const auto back = parse_trajectory_csv(trajectory_csv(traj));
  ASSERT_EQ(back.size(), traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    EXPECT_EQ(back[k].t, traj[k].t);
    EXPECT_EQ(back[k].camera.rotation, traj[k].camera.rotation);
    EXPECT_EQ(back[k].camera.translation, traj[k].camera.translation);
    EXPECT_EQ(back[k].camera.width, traj[k].camera.width);
    EXPECT_EQ(back[k].camera.zfar, traj[k].camera.zfar);
  }
}

TEST(Trajectory, CsvErrorsNameTheLine) {
  TrajectorySpec s;
  s.frames = 2;
  std::string csv = trajectory_csv(gen_trajectory(s));
  EXPECT_THROW(parse_trajectory_csv("frame,t\n"), std::runtime_error);
  const auto pos = csv.rfind(",256,256,");
  csv.replace(pos, 9, ",256,abc,");
  try {
    parse_trajectory_csv(csv);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace splatsim
