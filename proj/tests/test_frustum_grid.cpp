// Copyright 2026 The splatsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "splatsim/frustum_grid.hpp"
#include "splatsim/synth.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <vector>

namespace splatsim {
namespace {

std::vector<Gaussian4D<float>> small_scene(std::size_t n, std::uint64_t seed, bool dynamic = true) {
  SyntheticSpec s;
  s.count = n;
  s.seed = seed;
  s.scale = 0.15f;
  s.dynamic = dynamic;
  s.distribution = Distribution::kClustered;
  return gen_synthetic(s);
}

TEST(UniformEdges, EndpointsExact) {
  const auto e = uniform_edges(-1.3f, 2.7f, 7);
  ASSERT_EQ(e.size(), 8u);
  EXPECT_EQ(e.front(), -1.3f);
  EXPECT_EQ(e.back(), 2.7f);
  EXPECT_TRUE(std::is_sorted(e.begin(), e.end()));
}

TEST(GridDetail, LocateAndOverlapRange) {
  const std::vector<float> e = {0, 1, 2, 3};
  EXPECT_EQ(grid_detail::locate(e, -5), 0);
  EXPECT_EQ(grid_detail::locate(e, 1.0f), 1);
  EXPECT_EQ(grid_detail::locate(e, 3.0f), 2);
  EXPECT_EQ(grid_detail::overlap_range(e, 0.5f, 1.5f), std::make_pair(0, 1));
  // Closed intervals: touching an edge overlaps both neighbours.
  EXPECT_EQ(grid_detail::overlap_range(e, 1.0f, 1.0f), std::make_pair(0, 1));
  EXPECT_EQ(grid_detail::overlap_range(e, 5.0f, 6.0f).second, 2);
  EXPECT_GT(grid_detail::overlap_range(e, 5.0f, 6.0f).first, 2);
}

TEST(OverlappedCells, MatchesBruteForce) {
  const auto scene = small_scene(600, 3);
  for (int n : {1, 2, 3, 5}) {
    const GridLayout layout = build_layout(scene, n);
    for (const auto& g : scene) {
      const auto s = grid_detail::support_box(g, layout.support_sigma);
      std::set<std::uint32_t> want;
      for (std::uint32_t c = 0; c < layout.cells.size(); ++c) {
        const auto& cell = layout.cells[c];
        if (cell.box.overlaps(s.box) && cell.t_lo <= s.t_hi && s.t_lo <= cell.t_hi) want.insert(c);
      }
      const auto got_v = overlapped_cells(layout, g);
      const std::set<std::uint32_t> got(got_v.begin(), got_v.end());
      ASSERT_EQ(got, want) << "n=" << n;
    }
  }
}

TEST(BuildLayout, Invariants) {
  const auto scene = small_scene(1500, 4);
  for (int n : {1, 2, 4}) {
    const GridLayout layout = build_layout(scene, n);
    ASSERT_EQ(layout.cells.size(), static_cast<std::size_t>(n * n * n * n));
    ASSERT_EQ(layout.record_count(), scene.size());
    std::vector<std::uint32_t> sorted = layout.record_at;
    std::sort(sorted.begin(), sorted.end());
    for (std::uint32_t i = 0; i < sorted.size(); ++i) ASSERT_EQ(sorted[i], i);
    for (std::uint32_t a = 0; a < scene.size(); ++a)
      ASSERT_EQ(layout.address_of[layout.record_at[a]], a);

    // Home ranges tile the address space in cell order.
    std::uint32_t next = 0;
    std::vector<std::uint32_t> owner(scene.size());
    for (std::uint32_t c = 0; c < layout.cells.size(); ++c) {
      ASSERT_EQ(layout.cells[c].home.begin, next);
      next = layout.cells[c].home.end;
      for (std::uint32_t a = layout.cells[c].home.begin; a < next; ++a) {
        owner[a] = c;
        ASSERT_EQ(home_cell(layout, scene[layout.record_at[a]]), c);
      }
    }
    ASSERT_EQ(next, scene.size());

    // Spill runs list exactly the non-home overlaps, within their owner.
    std::set<std::pair<std::uint32_t, std::uint32_t>> from_runs, want;
    for (std::uint32_t c = 0; c < layout.cells.size(); ++c)
      for (const auto& run : layout.cells[c].spills) {
        ASSERT_FALSE(run.range.empty());
        ASSERT_NE(run.owner, c);
        for (std::uint32_t a = run.range.begin; a < run.range.end; ++a) {
          ASSERT_EQ(owner[a], run.owner);
          from_runs.insert({c, a});
        }
      }
    for (std::uint32_t i = 0; i < scene.size(); ++i)
      for (std::uint32_t c : overlapped_cells(layout, scene[i]))
        if (c != home_cell(layout, scene[i])) want.insert({c, layout.address_of[i]});
    ASSERT_EQ(from_runs, want) << "n=" << n;
    EXPECT_EQ(layout.metadata_bytes(), layout.cells.size() * 8 + layout.spill_run_count() * 12);
  }
}

TEST(BuildLayout, RejectsBadInput) {
  const auto scene = small_scene(10, 1);
  EXPECT_THROW(build_layout(scene, 0), std::invalid_argument);
  EXPECT_THROW(build_layout(std::span<const Gaussian4D<float>>{}, 2), std::invalid_argument);
}

TEST(BuildLayout, StaticSceneSpansAllTimeCells) {
  const auto scene = small_scene(200, 5, false);
  const GridLayout layout = build_layout(scene, 3);
  for (const auto& g : scene) EXPECT_EQ(overlapped_cells(layout, g).size() % 3, 0u);
}

TEST(Coalesce, MaximalRuns) {
  const auto s = coalesce({0, 1, 1, 0, 1, 0, 0, 1, 1, 1});
  ASSERT_EQ(s.ranges.size(), 3u);
  EXPECT_EQ(s.ranges[0], (AddrRange{1, 3}));
  EXPECT_EQ(s.ranges[1], (AddrRange{4, 5}));
  EXPECT_EQ(s.ranges[2], (AddrRange{7, 10}));
  EXPECT_EQ(s.record_count, 6u);
}

TEST(ResolveFetch, MatchesSetUnion) {
  const auto scene = small_scene(2000, 6);
  const GridLayout layout = build_layout(scene, 3);
  std::mt19937_64 rng(7);
  std::bernoulli_distribution pick(0.3);
  for (int it = 0; it < 50; ++it) {
    std::vector<std::uint32_t> visible;
    for (std::uint32_t c = 0; c < layout.cells.size(); ++c)
      if (pick(rng)) visible.push_back(c);
    std::set<std::uint32_t> want;
    for (std::uint32_t c : visible) {
      for (std::uint32_t a = layout.cells[c].home.begin; a < layout.cells[c].home.end; ++a)
        want.insert(a);
      for (const auto& run : layout.cells[c].spills)
        for (std::uint32_t a = run.range.begin; a < run.range.end; ++a) want.insert(a);
    }
    const FetchSchedule s = resolve_fetch(layout, visible);
    std::set<std::uint32_t> got;
    for (std::size_t i = 0; i < s.ranges.size(); ++i) {
      if (i > 0) {
        ASSERT_LT(s.ranges[i - 1].end, s.ranges[i].begin);
      }
      for (std::uint32_t a = s.ranges[i].begin; a < s.ranges[i].end; ++a) got.insert(a);
    }
    ASSERT_EQ(got, want);
    ASSERT_EQ(s.record_count, want.size());
  }
}

Camera<float> view_camera(const Vec3f& eye, const Vec3f& target, int size = 64) {
  TrajectorySpec s;
  s.width = s.height = size;
  s.focal = static_cast<float>(size);
  s.znear = 0.1f;
  s.zfar = 100.0f;
  return look_camera(eye, target - eye, s);
}

TEST(MakeFrustum, InsideAndOutsidePoints) {
  const Camera<float> cam = view_camera(Vec3f(0, 0, -10), Vec3f::Zero());
  const Frustum f = make_frustum(cam, 0.5f, 0.0f);
  auto inside = [&](const Vec3f& p) {
    return std::all_of(f.planes.begin(), f.planes.end(),
                       [&](const Plane& pl) { return pl.eval(p) >= 0; });
  };
  auto world = [&](float u, float v, float z) {
    const Vec3f c((u - cam.cx) * z / cam.fx, (v - cam.cy) * z / cam.fy, z);
    return Vec3f(cam.rotation.transpose() * (c - cam.translation));
  };
  EXPECT_TRUE(inside(world(32, 32, 5)));
  EXPECT_TRUE(inside(world(1, 62, 50)));
  EXPECT_FALSE(inside(world(-3, 32, 5)));
  EXPECT_FALSE(inside(world(32, 70, 5)));
  EXPECT_FALSE(inside(world(32, 32, 0.05f)));
  EXPECT_FALSE(inside(world(32, 32, 200)));
  const Frustum g = make_frustum(cam, 0.5f, 4.0f);
  EXPECT_GE(g.planes[2].eval(world(-3, 32, 5)), 0.0f);
}

TEST(CullGrids, RejectionImpliesBoxOutsideOnePlane) {
  const auto scene = small_scene(1000, 8);
  const GridLayout layout = build_layout(scene, 4);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> u(-1, 1);
  for (int it = 0; it < 40; ++it) {
    const Vec3f eye = Vec3f(u(rng), u(rng), u(rng)).normalized() * 7.0f;
    const Camera<float> cam = view_camera(eye, Vec3f(u(rng), u(rng), u(rng)));
    const float t = (u(rng) + 1) / 2;
    const Frustum f = make_frustum(cam, t);
    const auto visible = cull_grids(layout, f);
    std::set<std::uint32_t> vis(visible.begin(), visible.end());
    for (std::uint32_t c = 0; c < layout.cells.size(); ++c) {
      const auto& cell = layout.cells[c];
      const bool in_time = t >= cell.t_lo && t <= cell.t_hi;
      if (!in_time) {
        ASSERT_FALSE(vis.count(c));
        continue;
      }
      if (vis.count(c)) continue;
      bool separated = false;
      for (const Plane& p : f.planes) {
        bool all_out = true;
        for (int k = 0; k < 8; ++k) {
          const Vec3f corner((k & 1) ? cell.box.hi(0) : cell.box.lo(0),
                             (k & 2) ? cell.box.hi(1) : cell.box.lo(1),
                             (k & 4) ? cell.box.hi(2) : cell.box.lo(2));
          all_out &= p.eval(corner) < 0;
        }
        separated |= all_out;
      }
      ASSERT_TRUE(separated) << c;
    }
  }
}

// A Gaussian contributes to the frame when some pixel centre receives an
// alpha of at least 1/255. Checked by brute force over every pixel.
bool contributes(const Gaussian4D<float>& g, const Camera<float>& cam, float t) {
  const auto s = slice_at_time(g, t);
  if (g.opacity * s.temporal_weight < kAlphaMin) return false;
  const auto p = project(s, cam);
  if (!p || p->geometry.depth > cam.zfar) return false;
  Splat2D<float> sp;
  sp.mean = p->geometry.mean;
  sp.cov = p->geometry.cov;
  if (!set_conic(sp)) return false;
  sp.opacity = g.opacity;
  sp.temporal_q = s.temporal_q;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x)
      if (eval_alpha(sp, Vec2f(static_cast<float>(x), static_cast<float>(y))) >= kAlphaMin)
        return true;
  return false;
}

TEST(ResolveFetch, SupersetOfContributingGaussians) {
  const auto scene = small_scene(1500, 10);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<float> u(-1, 1);
  for (int n : {2, 4, 8}) {
    const GridLayout layout = build_layout(scene, n);
    for (int it = 0; it < 12; ++it) {
      // Half the cameras sit inside the scene volume.
      const float dist = it < 6 ? 3.0f + 4.0f * (u(rng) + 1) : 0.25f + (u(rng) + 1);
      const Vec3f eye = Vec3f(u(rng), u(rng), u(rng)).normalized() * dist;
      const Camera<float> cam = view_camera(eye, Vec3f(u(rng), u(rng), u(rng)), 48);
      const float t = (u(rng) + 1) / 2;
      const auto visible = cull_grids(layout, make_frustum(cam, t));
      const FetchSchedule s = resolve_fetch(layout, visible);
      std::vector<std::uint8_t> fetched(scene.size(), 0);
      for (const auto& r : s.ranges)
        for (std::uint32_t a = r.begin; a < r.end; ++a) fetched[layout.record_at[a]] = 1;
      for (std::size_t i = 0; i < scene.size(); ++i)
        if (!fetched[i]) {
          ASSERT_FALSE(contributes(scene[i], cam, t)) << "n=" << n << " i=" << i;
        }
    }
  }
}

}  // namespace
}  // namespace splatsim
