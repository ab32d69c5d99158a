// Copyright 2026 The splatsim Authors
// SPDX-License-Identifier: Apache-2.0

// Coarse temporal × cubic grid over the scene, built offline. Each cell owns
// a contiguous DRAM range of the Gaussians homed in it and holds pointer
// runs into neighbours' ranges for Gaussians that spill across its bounds.
// Culling then works on cell boxes alone; no per-Gaussian record is read.

#pragma once

#include "splatsim/gauss4d.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace splatsim {

/// sqrt(2·ln 255): a Gaussian factor drops below 1/255 beyond this many
/// standard deviations, so no contribution survives outside this support.
inline const float kSupportSigma = static_cast<float>(std::sqrt(2.0 * std::log(255.0)));
/// Pixel guard band added to the side planes of the culling frustum. Covers
/// the 2D covariance floor and the linearized projection.
inline constexpr float kFrustumGuardPx = 4.0f;

/// Half-open range of record addresses.
struct AddrRange {
  std::uint32_t begin = 0;
  std::uint32_t end = 0;

  std::uint32_t size() const { return end - begin; }
  bool empty() const { return begin == end; }
  bool contains(std::uint32_t a) const { return a >= begin && a < end; }
  friend bool operator==(const AddrRange&, const AddrRange&) = default;
};

struct SpillRun {
  std::uint32_t owner = 0;  ///< cell whose home range holds the run
  AddrRange range;
  friend bool operator==(const SpillRun&, const SpillRun&) = default;
};

struct Aabb {
  Vec3f lo = Vec3f::Zero();
  Vec3f hi = Vec3f::Zero();

  bool overlaps(const Aabb& o) const {
    return (lo.array() <= o.hi.array()).all() && (o.lo.array() <= hi.array()).all();
  }
  bool contains(const Vec3f& p) const {
    return (lo.array() <= p.array()).all() && (p.array() <= hi.array()).all();
  }
};

struct CubicCell {
  Aabb box;
  float t_lo = 0, t_hi = 1;
  AddrRange home;
  std::vector<SpillRun> spills;
};

struct GridLayout {
  int grid_n = 1;
  float support_sigma = 3.0f;
  Aabb scene_aabb;
  std::vector<float> t_edges;
  std::array<std::vector<float>, 3> axis_edges;
  std::vector<CubicCell> cells;
  /// address -> scene index
  std::vector<std::uint32_t> record_at;
  /// scene index -> address
  std::vector<std::uint32_t> address_of;

  std::size_t record_count() const { return record_at.size(); }
  std::size_t cell_index(int ti, int xi, int yi, int zi) const {
    const std::size_t n = static_cast<std::size_t>(grid_n);
    return ((static_cast<std::size_t>(ti) * n + zi) * n + yi) * n + xi;
  }
  std::size_t spill_run_count() const {
    std::size_t s = 0;
    for (const auto& c : cells) s += c.spills.size();
    return s;
  }
  /// On-chip bytes: one address pair per cell plus owner + pair per spill.
  std::size_t metadata_bytes() const { return cells.size() * 8 + spill_run_count() * 12; }
};

/// Uniform edges; the last edge is exactly `hi`.
inline std::vector<float> uniform_edges(float lo, float hi, int n) {
  std::vector<float> e(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i)
    e[static_cast<std::size_t>(i)] =
        (i == n) ? hi : lo + (hi - lo) * static_cast<float>(i) / static_cast<float>(n);
  return e;
}

namespace grid_detail {

// Cell containing v: last i with edges[i] <= v, clamped.
inline int locate(const std::vector<float>& edges, float v) {
  const int n = static_cast<int>(edges.size()) - 1;
  const auto it = std::upper_bound(edges.begin(), edges.end(), v);
  return std::clamp(static_cast<int>(it - edges.begin()) - 1, 0, n - 1);
}

// Cells whose closed interval [edges[i], edges[i+1]] meets [lo, hi].
inline std::pair<int, int> overlap_range(const std::vector<float>& edges, float lo, float hi) {
  const int n = static_cast<int>(edges.size()) - 1;
  const int first =
      static_cast<int>(std::lower_bound(edges.begin() + 1, edges.end(), lo) - (edges.begin() + 1));
  const int last =
      static_cast<int>(std::upper_bound(edges.begin(), edges.end() - 1, hi) - edges.begin()) - 1;
  return {std::clamp(first, 0, n), std::clamp(last, -1, n - 1)};
}

struct SupportBox {
  Aabb box;
  float t_lo, t_hi;
};

inline SupportBox support_box(const Gaussian4D<float>& g, float sigma) {
  const Extent4<float> e = extent4(g, sigma);
  SupportBox s;
  s.box.lo = g.mean.head<3>() - e.spatial;
  s.box.hi = g.mean.head<3>() + e.spatial;
  s.t_lo = g.mean(3) - e.temporal;
  s.t_hi = g.mean(3) + e.temporal;
  return s;
}

}  // namespace grid_detail

/// Cells (other than its home) a Gaussian's support box overlaps. Exposed
/// for tests and diagnostics.
inline std::vector<std::uint32_t> overlapped_cells(const GridLayout& layout,
                                                   const Gaussian4D<float>& g) {
  using namespace grid_detail;
  const SupportBox s = support_box(g, layout.support_sigma);
  std::vector<std::uint32_t> out;
  const auto [t0, t1] = overlap_range(layout.t_edges, s.t_lo, s.t_hi);
  std::array<std::pair<int, int>, 3> r;
  for (int a = 0; a < 3; ++a) r[a] = overlap_range(layout.axis_edges[a], s.box.lo(a), s.box.hi(a));
  for (int ti = t0; ti <= t1; ++ti)
    for (int zi = r[2].first; zi <= r[2].second; ++zi)
      for (int yi = r[1].first; yi <= r[1].second; ++yi)
        for (int xi = r[0].first; xi <= r[0].second; ++xi)
          out.push_back(static_cast<std::uint32_t>(layout.cell_index(ti, xi, yi, zi)));
  return out;
}

inline std::uint32_t home_cell(const GridLayout& layout, const Gaussian4D<float>& g) {
  using grid_detail::locate;
  const float t = std::clamp(g.mean(3), 0.0f, 1.0f);
  return static_cast<std::uint32_t>(layout.cell_index(
      locate(layout.t_edges, t), locate(layout.axis_edges[0], g.mean(0)),
      locate(layout.axis_edges[1], g.mean(1)), locate(layout.axis_edges[2], g.mean(2))));
}

/// Fills cell geometry from grid_n, scene_aabb and t range.
inline void init_cells(GridLayout& layout) {
  const int n = layout.grid_n;
  layout.t_edges = uniform_edges(0.0f, 1.0f, n);
  for (int a = 0; a < 3; ++a)
    layout.axis_edges[a] = uniform_edges(layout.scene_aabb.lo(a), layout.scene_aabb.hi(a), n);
  layout.cells.assign(static_cast<std::size_t>(n) * n * n * n, CubicCell{});
  for (int ti = 0; ti < n; ++ti)
    for (int zi = 0; zi < n; ++zi)
      for (int yi = 0; yi < n; ++yi)
        for (int xi = 0; xi < n; ++xi) {
          CubicCell& c = layout.cells[layout.cell_index(ti, xi, yi, zi)];
          c.t_lo = layout.t_edges[ti];
          c.t_hi = layout.t_edges[ti + 1];
          const std::array<int, 3> idx = {xi, yi, zi};
          for (int a = 0; a < 3; ++a) {
            c.box.lo(a) = layout.axis_edges[a][idx[a]];
            c.box.hi(a) = layout.axis_edges[a][idx[a] + 1];
          }
        }
}

/// Offline partitioning. Home cell by (mu_t, then mu_xyz); within a home
/// range records are grouped by the set of neighbours they spill into, so
/// each neighbour's references form few contiguous runs.
inline GridLayout build_layout(std::span<const Gaussian4D<float>> scene, int grid_n,
                               float support_sigma = kSupportSigma) {
  if (grid_n < 1) throw std::invalid_argument("build_layout: grid_n must be >= 1");
  if (scene.empty()) throw std::invalid_argument("build_layout: empty scene");
  GridLayout layout;
  layout.grid_n = grid_n;
  layout.support_sigma = support_sigma;

  Aabb bounds{Vec3f::Constant(std::numeric_limits<float>::max()),
              Vec3f::Constant(std::numeric_limits<float>::lowest())};
  for (const auto& g : scene) {
    const auto s = grid_detail::support_box(g, support_sigma);
    bounds.lo = bounds.lo.cwiseMin(s.box.lo);
    bounds.hi = bounds.hi.cwiseMax(s.box.hi);
  }
  for (int a = 0; a < 3; ++a)
    if (!(bounds.hi(a) > bounds.lo(a))) {
      bounds.lo(a) -= 0.5f;
      bounds.hi(a) += 0.5f;
    }
  layout.scene_aabb = bounds;
  init_cells(layout);

  const std::size_t count = scene.size();
  std::vector<std::uint32_t> home(count);
  std::vector<std::vector<std::uint32_t>> targets(count);
  std::vector<std::vector<std::uint32_t>> residents(layout.cells.size());
  for (std::size_t i = 0; i < count; ++i) {
    home[i] = home_cell(layout, scene[i]);
    auto cells = overlapped_cells(layout, scene[i]);
    std::erase(cells, home[i]);
    targets[i] = std::move(cells);
    residents[home[i]].push_back(static_cast<std::uint32_t>(i));
  }

  layout.record_at.reserve(count);
  layout.address_of.assign(count, 0);
  std::vector<std::uint32_t> owner_of_address;
  owner_of_address.reserve(count);
  for (std::size_t c = 0; c < layout.cells.size(); ++c) {
    auto& r = residents[c];
    std::stable_sort(r.begin(), r.end(), [&](std::uint32_t a, std::uint32_t b) {
      if (targets[a] != targets[b]) {
        // Records with no spills go last so the spilling ones cluster at
        // the front of the range.
        if (targets[a].empty() != targets[b].empty()) return targets[b].empty();
        return targets[a] < targets[b];
      }
      return scene[a].id < scene[b].id;
    });
    CubicCell& cell = layout.cells[c];
    cell.home.begin = static_cast<std::uint32_t>(layout.record_at.size());
    for (std::uint32_t idx : r) {
      layout.address_of[idx] = static_cast<std::uint32_t>(layout.record_at.size());
      layout.record_at.push_back(idx);
      owner_of_address.push_back(static_cast<std::uint32_t>(c));
    }
    cell.home.end = static_cast<std::uint32_t>(layout.record_at.size());
  }

  std::vector<std::vector<std::uint32_t>> referenced(layout.cells.size());
  for (std::uint32_t addr = 0; addr < count; ++addr)
    for (std::uint32_t c : targets[layout.record_at[addr]]) referenced[c].push_back(addr);
  for (std::size_t c = 0; c < layout.cells.size(); ++c) {
    const auto& addrs = referenced[c];  // ascending by construction
    for (std::size_t i = 0; i < addrs.size();) {
      std::size_t j = i + 1;
      while (j < addrs.size() && addrs[j] == addrs[j - 1] + 1 &&
             owner_of_address[addrs[j]] == owner_of_address[addrs[i]])
        ++j;
      layout.cells[c].spills.push_back(
          {owner_of_address[addrs[i]], {addrs[i], addrs[j - 1] + 1}});
      i = j;
    }
  }
  return layout;
}

/// Plane n·x + d; points with non-negative value are inside.
struct Plane {
  Vec3f normal = Vec3f::UnitZ();
  float offset = 0;
  float eval(const Vec3f& p) const { return normal.dot(p) + offset; }
};

struct Frustum {
  std::array<Plane, 6> planes;
  float t = 0;
};

/// World-space planes of the camera frustum (near, far, left, right, top,
/// bottom), with the side planes pushed out by guard_px pixels.
inline Frustum make_frustum(const Camera<float>& cam, float t, float guard_px = kFrustumGuardPx) {
  Frustum f;
  f.t = t;
  const float w = static_cast<float>(cam.width);
  const float h = static_cast<float>(cam.height);
  // Camera-space planes as (n, d) with n·x_cam + d >= 0 inside.
  const std::array<std::pair<Vec3f, float>, 6> cam_planes = {{
      {Vec3f(0, 0, 1), -cam.znear},
      {Vec3f(0, 0, -1), cam.zfar},
      {Vec3f(cam.fx, 0, cam.cx + guard_px), 0},
      {Vec3f(-cam.fx, 0, w + guard_px - cam.cx), 0},
      {Vec3f(0, cam.fy, cam.cy + guard_px), 0},
      {Vec3f(0, -cam.fy, h + guard_px - cam.cy), 0},
  }};
  for (std::size_t i = 0; i < 6; ++i) {
    const Vec3f n = cam_planes[i].first.normalized();
    const float d = cam_planes[i].second / cam_planes[i].first.norm();
    // n·(R x + t) + d = (Rᵀ n)·x + (n·t + d)
    f.planes[i].normal = cam.rotation.transpose() * n;
    f.planes[i].offset = n.dot(cam.translation) + d;
  }
  return f;
}

/// Conservative p-vertex test: false only when the box lies entirely on the
/// outside of some plane.
inline bool aabb_frustum_test(const Aabb& box, std::span<const Plane> planes) {
  for (const Plane& p : planes) {
    Vec3f v;
    for (int a = 0; a < 3; ++a) v(a) = p.normal(a) >= 0 ? box.hi(a) : box.lo(a);
    if (p.eval(v) < 0) return false;
  }
  return true;
}

/// Cells whose time span contains fr.t and whose box is not rejected.
inline std::vector<std::uint32_t> cull_grids(const GridLayout& layout, const Frustum& fr) {
  std::vector<std::uint32_t> visible;
  for (std::uint32_t c = 0; c < layout.cells.size(); ++c) {
    const CubicCell& cell = layout.cells[c];
    if (fr.t < cell.t_lo || fr.t > cell.t_hi) continue;
    if (aabb_frustum_test(cell.box, fr.planes)) visible.push_back(c);
  }
  return visible;
}

struct FetchSchedule {
  std::vector<AddrRange> ranges;  ///< ascending, maximal, disjoint
  std::size_t record_count = 0;
  /// Spill references skipped because the record was already scheduled.
  std::size_t duplicates_skipped = 0;
};

inline FetchSchedule coalesce(const std::vector<std::uint8_t>& marked) {
  FetchSchedule s;
  const auto n = static_cast<std::uint32_t>(marked.size());
  for (std::uint32_t a = 0; a < n;) {
    if (!marked[a]) {
      ++a;
      continue;
    }
    std::uint32_t b = a;
    while (b < n && marked[b]) ++b;
    s.ranges.push_back({a, b});
    s.record_count += b - a;
    a = b;
  }
  return s;
}

/// Home ranges of visible cells plus spill runs owned by invisible cells,
/// each record at most once.
inline FetchSchedule resolve_fetch(const GridLayout& layout,
                                   std::span<const std::uint32_t> visible) {
  std::vector<std::uint8_t> is_visible(layout.cells.size(), 0);
  for (std::uint32_t c : visible) is_visible.at(c) = 1;
  std::vector<std::uint8_t> marked(layout.record_count(), 0);
  for (std::uint32_t c : visible) {
    const AddrRange h = layout.cells[c].home;
    std::fill(marked.begin() + h.begin, marked.begin() + h.end, std::uint8_t{1});
  }
  std::size_t skipped = 0;
  for (std::uint32_t c : visible)
    for (const SpillRun& run : layout.cells[c].spills) {
      if (is_visible[run.owner]) {
        skipped += run.range.size();
        continue;
      }
      for (std::uint32_t a = run.range.begin; a < run.range.end; ++a) {
        if (marked[a])
          ++skipped;
        else
          marked[a] = 1;
      }
    }
  FetchSchedule s = coalesce(marked);
  s.duplicates_skipped = skipped;
  return s;
}

}  // namespace splatsim
