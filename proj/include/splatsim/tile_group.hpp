// Copyright 2026 The splatsim Authors
// SPDX-License-Identifier: Apache-2.0

// Connection strengths between adjacent tile blocks, the interpolated
// keep/cut threshold, union-find grouping and incremental regrouping driven
// by edges whose keep/cut decision changed since the previous frame.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <numeric>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace splatsim {

inline constexpr int kDefaultStrengthCap = 255;

/// Signed saturating counters on the interior edges of a bw × bh block
/// grid. Horizontal edges (x,y)-(x+1,y) come first, then vertical edges
/// (x,y)-(x,y+1), each in row-major order.
class ConnGraph {
 public:
  ConnGraph() = default;
  ConnGraph(int bw, int bh, int cap = kDefaultStrengthCap) : bw_(bw), bh_(bh), cap_(cap) {
    if (bw < 1 || bh < 1) throw std::invalid_argument("ConnGraph: empty grid");
    if (cap < 1) throw std::invalid_argument("ConnGraph: cap must be >= 1");
    strength_.assign(static_cast<std::size_t>(edge_count()), 0);
    mark_.assign(static_cast<std::size_t>(block_count()), 0);
  }

  int width() const { return bw_; }
  int height() const { return bh_; }
  int cap() const { return cap_; }
  int block_count() const { return bw_ * bh_; }
  int horizontal_edge_count() const { return (bw_ - 1) * bh_; }
  int edge_count() const { return horizontal_edge_count() + bw_ * (bh_ - 1); }

  int horizontal_edge(int x, int y) const { return y * (bw_ - 1) + x; }
  int vertical_edge(int x, int y) const { return horizontal_edge_count() + y * bw_ + x; }

  /// Blocks joined by edge e, lower index first.
  std::pair<int, int> endpoints(int e) const {
    if (e < horizontal_edge_count()) {
      const int y = e / (bw_ - 1), x = e % (bw_ - 1);
      return {y * bw_ + x, y * bw_ + x + 1};
    }
    const int v = e - horizontal_edge_count();
    return {v, v + bw_};
  }

  /// Edges touching a block, as (edge, neighbour) pairs in ascending
  /// neighbour order.
  template <typename F>
  void for_each_incident(int block, F&& f) const {
    const int x = block % bw_, y = block / bw_;
    if (y > 0) f(vertical_edge(x, y - 1), block - bw_);
    if (x > 0) f(horizontal_edge(x - 1, y), block - 1);
    if (x + 1 < bw_) f(horizontal_edge(x, y), block + 1);
    if (y + 1 < bh_) f(vertical_edge(x, y), block + bw_);
  }

  int strength(int e) const { return strength_[static_cast<std::size_t>(e)]; }
  void set_strength(int e, int v) { strength_[static_cast<std::size_t>(e)] = std::clamp(v, -cap_, cap_); }
  void bump(int e, int delta) { set_strength(e, strength(e) + delta); }
  std::span<const int> strengths() const { return strength_; }

  /// Edges inside the footprint gain one; edges leaving it lose one.
  void record_footprint(std::span<const int> blocks) {
    for (int b : blocks) {
      if (b < 0 || b >= block_count()) throw std::out_of_range("record_footprint: block");
      mark_[static_cast<std::size_t>(b)] = 1;
    }
    for (int b : blocks) {
      if (mark_[static_cast<std::size_t>(b)] != 1) continue;  // duplicate entry
      for_each_incident(b, [&](int e, int nb) {
        if (mark_[static_cast<std::size_t>(nb)] == 0)
          bump(e, -1);
        else if (nb > b)  // internal edges are counted from the lower endpoint
          bump(e, +1);
      });
      mark_[static_cast<std::size_t>(b)] = 2;
    }
    for (int b : blocks) mark_[static_cast<std::size_t>(b)] = 0;
  }

 private:
  int bw_ = 0, bh_ = 0, cap_ = kDefaultStrengthCap;
  std::vector<int> strength_;
  std::vector<std::uint8_t> mark_;
};

struct ThresholdParams {
  int k = 2;
  double user_defined_threshold = 0.5;
};

struct ThresholdBounds {
  double upper = 0;
  double lower = 0;
  double threshold = 0;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

/// Per block, the medians of its K highest and K lowest incident strengths;
/// upper/lower are the medians of those over blocks, and
/// threshold = (upper - lower)·udt + lower.
inline ThresholdBounds compute_threshold_bounds(const ConnGraph& g, const ThresholdParams& p) {
  if (p.k < 1) throw std::invalid_argument("compute_threshold: K must be >= 1");
  std::vector<double> highs, lows;
  std::vector<double> incident;
  for (int b = 0; b < g.block_count(); ++b) {
    incident.clear();
    g.for_each_incident(b, [&](int e, int) { incident.push_back(g.strength(e)); });
    if (incident.empty()) continue;
    std::sort(incident.begin(), incident.end());
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(p.k), incident.size());
    highs.push_back(median_of({incident.end() - static_cast<std::ptrdiff_t>(k), incident.end()}));
    lows.push_back(median_of({incident.begin(), incident.begin() + static_cast<std::ptrdiff_t>(k)}));
  }
  ThresholdBounds t;
  t.upper = median_of(std::move(highs));
  t.lower = median_of(std::move(lows));
  t.threshold = (t.upper - t.lower) * p.user_defined_threshold + t.lower;
  return t;
}

inline double compute_threshold(const ConnGraph& g, const ThresholdParams& p) {
  return compute_threshold_bounds(g, p).threshold;
}

struct Grouping {
  int width = 0, height = 0;
  std::vector<int> group_of;
  std::vector<std::uint8_t> edge_kept;
  int max_group = 1;
  int next_id = 0;

  int group_count() const {
    std::vector<int> ids = group_of;
    std::sort(ids.begin(), ids.end());
    return static_cast<int>(std::unique(ids.begin(), ids.end()) - ids.begin());
  }
};

namespace group_detail {

class DisjointSet {
 public:
  explicit DisjointSet(int n) : parent_(static_cast<std::size_t>(n)) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[static_cast<std::size_t>(x)] != x) {
      auto& p = parent_[static_cast<std::size_t>(x)];
      p = parent_[static_cast<std::size_t>(p)];
      x = p;
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[static_cast<std::size_t>(b)] = a;  // root is the smallest block
  }

 private:
  std::vector<int> parent_;
};

inline std::vector<std::uint8_t> edge_decisions(const ConnGraph& g, double threshold) {
  std::vector<std::uint8_t> kept(static_cast<std::size_t>(g.edge_count()));
  for (int e = 0; e < g.edge_count(); ++e)
    kept[static_cast<std::size_t>(e)] = g.strength(e) >= threshold ? 1 : 0;
  return kept;
}

// Groups the blocks flagged in `region` (a union of whole components of the
// kept-edge graph). Components are found with union-find; a component larger
// than max_group is split into BFS chunks seeded at its smallest unassigned
// block. Assigns fresh ids from out.next_id in ascending seed order.
inline void solve_region(const ConnGraph& g, const std::vector<std::uint8_t>& kept,
                         const std::vector<std::uint8_t>& region, Grouping& out) {
  const int n = g.block_count();
  DisjointSet ds(n);
  for (int e = 0; e < g.edge_count(); ++e) {
    if (!kept[static_cast<std::size_t>(e)]) continue;
    const auto [a, b] = g.endpoints(e);
    if (region[static_cast<std::size_t>(a)] && region[static_cast<std::size_t>(b)]) ds.unite(a, b);
  }
  std::vector<int> size(static_cast<std::size_t>(n), 0);
  for (int b = 0; b < n; ++b)
    if (region[static_cast<std::size_t>(b)]) ++size[static_cast<std::size_t>(ds.find(b))];

  std::vector<std::uint8_t> assigned(static_cast<std::size_t>(n), 0);
  std::unordered_map<int, int> root_group;
  std::deque<int> queue;
  for (int s = 0; s < n; ++s) {
    if (!region[static_cast<std::size_t>(s)] || assigned[static_cast<std::size_t>(s)]) continue;
    const int root = ds.find(s);
    if (size[static_cast<std::size_t>(root)] <= out.max_group) {
      auto it = root_group.find(root);
      if (it == root_group.end()) it = root_group.emplace(root, out.next_id++).first;
      out.group_of[static_cast<std::size_t>(s)] = it->second;
      assigned[static_cast<std::size_t>(s)] = 1;
      continue;
    }
    const int id = out.next_id++;
    int taken = 0;
    queue.assign(1, s);
    assigned[static_cast<std::size_t>(s)] = 1;
    while (!queue.empty() && taken < out.max_group) {
      const int b = queue.front();
      queue.pop_front();
      out.group_of[static_cast<std::size_t>(b)] = id;
      ++taken;
      g.for_each_incident(b, [&](int e, int nb) {
        if (kept[static_cast<std::size_t>(e)] && region[static_cast<std::size_t>(nb)] &&
            !assigned[static_cast<std::size_t>(nb)]) {
          assigned[static_cast<std::size_t>(nb)] = 1;
          queue.push_back(nb);
        }
      });
    }
    // Blocks queued but not taken go back to the pool.
    for (int b : queue) assigned[static_cast<std::size_t>(b)] = 0;
  }
}

}  // namespace group_detail

/// Keeps edges with strength >= threshold and groups connected blocks,
/// splitting components above max_group blocks.
inline Grouping group_full(const ConnGraph& g, double threshold, int max_group) {
  if (max_group < 1) throw std::invalid_argument("group_full: max_group must be >= 1");
  Grouping out;
  out.width = g.width();
  out.height = g.height();
  out.max_group = max_group;
  out.group_of.assign(static_cast<std::size_t>(g.block_count()), -1);
  out.edge_kept = group_detail::edge_decisions(g, threshold);
  const std::vector<std::uint8_t> all(static_cast<std::size_t>(g.block_count()), 1);
  group_detail::solve_region(g, out.edge_kept, all, out);
  return out;
}

struct IncrementalResult {
  Grouping grouping;
  /// Edges whose keep/cut decision changed (deformation flags raised).
  int deform_count = 0;
  /// Blocks re-solved by union-find this frame.
  int regrouped_blocks = 0;
};

/// Re-solves only the region reachable from flagged edges through edges kept
/// in either frame. Blocks outside it keep their previous group ids; the
/// partition matches group_full on the same inputs.
inline IncrementalResult group_incremental(const Grouping& prev, const ConnGraph& g,
                                           double threshold) {
  if (prev.width != g.width() || prev.height != g.height())
    throw std::invalid_argument("group_incremental: grid dimensions changed");
  IncrementalResult r;
  r.grouping = prev;
  Grouping& out = r.grouping;
  out.edge_kept = group_detail::edge_decisions(g, threshold);

  const int n = g.block_count();
  std::vector<std::uint8_t> region(static_cast<std::size_t>(n), 0);
  std::deque<int> queue;
  for (int e = 0; e < g.edge_count(); ++e) {
    if (out.edge_kept[static_cast<std::size_t>(e)] == prev.edge_kept[static_cast<std::size_t>(e)])
      continue;
    ++r.deform_count;
    const auto [a, b] = g.endpoints(e);
    for (int v : {a, b})
      if (!region[static_cast<std::size_t>(v)]) {
        region[static_cast<std::size_t>(v)] = 1;
        queue.push_back(v);
      }
  }
  if (r.deform_count == 0) return r;

  while (!queue.empty()) {
    const int b = queue.front();
    queue.pop_front();
    g.for_each_incident(b, [&](int e, int nb) {
      const auto ei = static_cast<std::size_t>(e);
      if ((out.edge_kept[ei] || prev.edge_kept[ei]) && !region[static_cast<std::size_t>(nb)]) {
        region[static_cast<std::size_t>(nb)] = 1;
        queue.push_back(nb);
      }
    });
  }
  for (int b = 0; b < n; ++b)
    if (region[static_cast<std::size_t>(b)]) {
      out.group_of[static_cast<std::size_t>(b)] = -1;
      ++r.regrouped_blocks;
    }
  group_detail::solve_region(g, out.edge_kept, region, out);
  return r;
}

/// True when both groupings induce the same set partition of blocks.
inline bool same_partition(const Grouping& a, const Grouping& b) {
  if (a.group_of.size() != b.group_of.size()) return false;
  std::unordered_map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.group_of.size(); ++i) {
    const auto [it1, new1] = ab.emplace(a.group_of[i], b.group_of[i]);
    const auto [it2, new2] = ba.emplace(b.group_of[i], a.group_of[i]);
    if (it1->second != b.group_of[i] || it2->second != a.group_of[i]) return false;
  }
  return true;
}

struct ScheduledGroup {
  int group = 0;
  std::vector<int> blocks;
};

/// Groups ordered by their smallest block; blocks in scan order.
inline std::vector<ScheduledGroup> schedule(const Grouping& grouping) {
  std::vector<ScheduledGroup> out;
  std::unordered_map<int, std::size_t> slot;
  for (int b = 0; b < static_cast<int>(grouping.group_of.size()); ++b) {
    const int id = grouping.group_of[static_cast<std::size_t>(b)];
    auto it = slot.find(id);
    if (it == slot.end()) {
      it = slot.emplace(id, out.size()).first;
      out.push_back({id, {}});
    }
    out[it->second].blocks.push_back(b);
  }
  return out;
}

}  // namespace splatsim
