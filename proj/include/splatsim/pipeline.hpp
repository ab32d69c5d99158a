// Copyright 2026 The splatsim Authors
// SPDX-License-Identifier: Apache-2.0

// One frame of the renderer with all four optimizations switchable:
//
//   fetch -> slice/project/shade -> tile & block binning -> per-block sort
//         -> tile ordering -> buffer-simulated blend -> state update
//
// Pixel math is independent of the optimization flags. The flags only change
// which records are fetched, how sorting is done and in which order tiles
// are visited, and so only change the counters.

#pragma once

#include "splatsim/aii_sort.hpp"
#include "splatsim/exp_dcim.hpp"
#include "splatsim/frustum_grid.hpp"
#include "splatsim/gauss4d.hpp"
#include "splatsim/image.hpp"
#include "splatsim/memcost.hpp"
#include "splatsim/tile_group.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace splatsim {

struct PipelineFlags {
  bool dr_fc = false;
  bool atg = false;
  bool aii = false;
  bool lut_exp = false;

  static PipelineFlags all_on() { return {true, true, true, true}; }
  friend bool operator==(const PipelineFlags&, const PipelineFlags&) = default;
};

struct PipelineConfig {
  PipelineFlags flags;
  int grid_n = 4;
  int buckets = 8;
  int tile_size = 16;
  /// Tile blocks are block_side × block_side tiles.
  int block_side = 4;
  double udt = 0.5;
  int k = 2;
  /// Largest group in blocks; 0 derives it from the buffer capacity.
  int max_group = 0;
  int max_group_cap = 16;
  int strength_cap = kDefaultStrengthCap;
  float term_eps = static_cast<float>(kDefaultTermEps);
  int sh_degree = 1;
  /// Round every fetched parameter to binary16 precision before use.
  bool quantize16 = false;
  /// Bin splats by the axis-aligned box of the 3-sigma ellipse instead of
  /// the square of half-width `radius`.
  bool tight_footprint = false;
  std::size_t buffer_bytes = kDefaultBufferBytes;
  std::size_t burst_bytes = kDefaultBurstBytes;
  LutPrecision lut_precision = LutPrecision::kExact;
  /// Worker threads for the data-parallel stages; 0 uses all cores.
  int threads = 1;
  Vec3f background = Vec3f::Zero();
  float guard_px = kFrustumGuardPx;
  EnergyConfig energy;
};

inline void validate_config(const PipelineConfig& c) {
  auto fail = [](const std::string& m) { throw std::invalid_argument("pipeline config: " + m); };
  if (c.grid_n < 1) fail("grid_n must be >= 1");
  if (!is_valid_bucket_count(c.buckets)) fail("buckets must be a power of two >= 2");
  if (c.buckets > 65536) fail("buckets must be <= 65536");
  if (c.tile_size < 1) fail("tile_size must be >= 1");
  if (c.block_side < 1) fail("block_side must be >= 1");
  if (!(c.udt >= 0 && c.udt <= 1)) fail("udt must lie in [0, 1]");
  if (c.k < 1) fail("k must be >= 1");
  if (c.max_group < 0) fail("max_group must be >= 0");
  if (c.max_group_cap < 1) fail("max_group_cap must be >= 1");
  if (c.strength_cap < 1) fail("strength_cap must be >= 1");
  if (!(c.term_eps >= 0)) fail("term_eps must be >= 0");
  if (c.sh_degree < 0 || c.sh_degree > kMaxShDegree) fail("sh_degree must lie in [0, 3]");
  if (c.burst_bytes == 0) fail("burst_bytes must be > 0");
  if (c.threads < 0) fail("threads must be >= 0");
}

/// Thrown when carried state no longer matches the frame geometry.
class ResetRequired : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Frame-to-frame knowledge: bucket cuts per tile block, the last strength
/// map and grouping.
struct PosterioriState {
  int frame_index = 0;
  int width = 0, height = 0, tile_size = 0, block_side = 0, buckets = 0;
  std::vector<BucketState> block_buckets;
  ConnGraph graph;
  std::optional<Grouping> grouping;
  int max_group = 0;

  bool fresh() const { return frame_index == 0; }
};

struct FrameMetrics {
  int frame_index = 0;
  float t = 0;
  std::uint64_t scene_size = 0;
  std::uint64_t fetched = 0;
  std::uint64_t temporally_culled = 0;
  std::uint64_t frustum_culled = 0;
  std::uint64_t splatted = 0;
  /// (splat, block) and (splat, tile) pairs.
  std::uint64_t block_entries = 0;
  std::uint64_t tile_entries = 0;
  std::uint64_t visible_cells = 0;
  std::uint64_t fetch_ranges = 0;
  std::uint64_t duplicates_skipped = 0;
  DramCounters fetch;
  DramCounters refetch;
  BufferCounters buffer;
  SortStats sort;
  std::uint64_t sorted_blocks = 0;
  double threshold = 0;
  std::uint64_t deform_count = 0;
  std::uint64_t regrouped_blocks = 0;
  std::uint64_t group_count = 0;
  int max_group = 0;
  bool full_regroup = false;
  double dram_energy_pj = 0;
  double sram_energy_pj = 0;
  double psnr_db = std::numeric_limits<double>::quiet_NaN();

  std::uint64_t dram_bytes() const { return fetch.bytes + refetch.bytes; }
  std::uint64_t dram_bursts() const { return fetch.bursts + refetch.bursts; }
};

struct SceneRef {
  std::span<const Gaussian4D<float>> gaussians;
  /// Required when DR-FC is enabled.
  const GridLayout* layout = nullptr;
};

struct FrameResult {
  Image image;
  FrameMetrics metrics;
};

/// Inclusive tile rectangle.
struct TileRect {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
  bool empty() const { return x1 < x0 || y1 < y0; }
  bool contains(int tx, int ty) const { return tx >= x0 && tx <= x1 && ty >= y0 && ty <= y1; }
};

/// Tiles whose [k·ts, (k+1)·ts) rectangle meets the box of half-widths
/// (rx, ry) centred on `mean`, clipped to the tile grid.
inline TileRect intersect_tiles(const Vec2f& mean, float rx, float ry, int tile_size, int tiles_x,
                                int tiles_y) {
  const double ts = tile_size;
  auto lo = [&](double v, int n) { return static_cast<int>(std::clamp(std::floor(v / ts), -1.0, double(n))); };
  TileRect r{lo(mean(0) - rx, tiles_x), lo(mean(1) - ry, tiles_y),
             lo(mean(0) + rx, tiles_x), lo(mean(1) + ry, tiles_y)};
  if (r.x1 < 0 || r.y1 < 0 || r.x0 >= tiles_x || r.y0 >= tiles_y) return TileRect{};
  r.x0 = std::max(r.x0, 0);
  r.y0 = std::max(r.y0, 0);
  r.x1 = std::min(r.x1, tiles_x - 1);
  r.y1 = std::min(r.y1, tiles_y - 1);
  return r;
}

/// Square of half-width `radius`.
inline TileRect intersect_tiles(const Vec2f& mean, float radius, int tile_size, int tiles_x,
                                int tiles_y) {
  return intersect_tiles(mean, radius, radius, tile_size, tiles_x, tiles_y);
}

inline Gaussian4D<float> quantize_fp16(const Gaussian4D<float>& g) {
  auto q = [](float v) { return static_cast<float>(round_to_half_precision(v)); };
  Gaussian4D<float> out = g;
  out.mean = g.mean.unaryExpr(q);
  out.cov = g.cov.unaryExpr(q);
  out.opacity = q(g.opacity);
  for (auto& c : out.sh) c = c.unaryExpr(q);
  return out;
}

namespace pipeline_detail {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs f(i) for i in [0, n) on contiguous static chunks.
template <typename F>
void parallel_for(std::size_t n, int threads, F&& f) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w * n / workers; i < (w + 1) * n / workers; ++i) f(i);
    });
  for (auto& th : pool) th.join();
}

enum class Fate : std::uint8_t { kSplatted, kTemporal, kFrustum };

struct Prepared {
  Fate fate = Fate::kFrustum;
  Splat2D<float> splat;
  TileRect tiles;
  // Exponent factors with -log2(e)/2 folded in, for the LUT path.
  float ea = 0, eb = 0, ec = 0, et = 0;
};

inline Prepared prepare(const Gaussian4D<float>& g, const Camera<float>& cam, const Vec3f& campos,
                        float t, int tile_size, int tiles_x, int tiles_y, bool tight) {
  Prepared p;
  const Sliced3D<float> s = slice_at_time(g, t);
  if (s.temporal_weight < static_cast<float>(kAlphaMin)) {
    p.fate = Fate::kTemporal;
    return p;
  }
  const auto proj = project(s, cam);
  if (!proj || proj->geometry.depth > cam.zfar) return p;
  Splat2D<float>& sp = p.splat;
  sp.mean = proj->geometry.mean;
  sp.cov = proj->geometry.cov;
  sp.depth = proj->geometry.depth;
  sp.radius = proj->geometry.radius;
  if (!set_conic(sp)) return p;
  p.tiles = tight ? intersect_tiles(sp.mean, 3.0f * std::sqrt(sp.cov(0, 0)), 3.0f * std::sqrt(sp.cov(1, 1)),
                                    tile_size, tiles_x, tiles_y)
                  : intersect_tiles(sp.mean, sp.radius, tile_size, tiles_x, tiles_y);
  if (p.tiles.empty()) return p;

  Vec3f dir = s.mean - campos;
  const float len = dir.norm();
  dir = len > 0 ? Vec3f(dir / len) : Vec3f::UnitZ();
  sp.color = eval_sh<float>(g.sh, dir);
  sp.opacity = g.opacity;
  sp.temporal_q = s.temporal_q;
  sp.alpha_base = g.opacity * s.temporal_weight;
  sp.id = g.id;

  const float h = -std::numbers::log2e_v<float> / 2;
  p.ea = sp.conic(0) * h;
  p.eb = sp.conic(1) * 2 * h;
  p.ec = sp.conic(2) * h;
  p.et = sp.temporal_q * h;
  p.fate = Fate::kSplatted;
  return p;
}

// Frame-wide segment cuts: per cut index, the key-count-weighted mean of
// the finite per-block cuts.
inline std::vector<float> segment_cuts(const std::vector<BlockSortResult>& sorted, int buckets) {
  std::vector<double> sum(static_cast<std::size_t>(buckets - 1), 0.0);
  std::vector<double> weight(sum.size(), 0.0);
  for (const auto& r : sorted) {
    if (r.sorted.empty()) continue;
    for (std::size_t i = 0; i < sum.size(); ++i) {
      const float c = r.used_boundaries[i];
      if (!std::isfinite(c)) continue;
      sum[i] += static_cast<double>(c) * static_cast<double>(r.sorted.size());
      weight[i] += static_cast<double>(r.sorted.size());
    }
  }
  std::vector<float> cuts(sum.size(), std::numeric_limits<float>::infinity());
  for (std::size_t i = 0; i < cuts.size(); ++i)
    if (weight[i] > 0) cuts[i] = static_cast<float>(sum[i] / weight[i]);
  std::sort(cuts.begin(), cuts.end());
  return cuts;
}

// Prior cuts for a block without history: mean of its valid 8-neighbours,
// else the mean over all valid blocks.
inline BucketState seed_state(const std::vector<BucketState>& prev, int bw, int bh, int block,
                              const BucketState& global) {
  const int bx = block % bw, by = block / bw;
  std::vector<BucketState> near;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      const int x = bx + dx, y = by + dy;
      if ((dx == 0 && dy == 0) || x < 0 || y < 0 || x >= bw || y >= bh) continue;
      const BucketState& s = prev[static_cast<std::size_t>(y * bw + x)];
      if (s.valid) near.push_back(s);
    }
  if (near.empty()) return global;
  return average_boundaries(near);
}

}  // namespace pipeline_detail

inline FrameResult render_frame(const SceneRef& scene, const Camera<float>& cam, float t,
                                PosterioriState& state, const PipelineConfig& cfg) {
  using namespace pipeline_detail;
  validate_config(cfg);
  validate_camera(cam);
  const int ts = cfg.tile_size;
  const int tiles_x = (cam.width + ts - 1) / ts;
  const int tiles_y = (cam.height + ts - 1) / ts;
  const int b = cfg.block_side;
  const int bw = (tiles_x + b - 1) / b;
  const int bh = (tiles_y + b - 1) / b;
  const int block_count = bw * bh;

  if (!state.fresh() &&
      (state.width != cam.width || state.height != cam.height || state.tile_size != ts ||
       state.block_side != b || state.buckets != cfg.buckets))
    throw ResetRequired("posteriori state does not match frame geometry; reset required");
  if (state.fresh()) {
    state.width = cam.width;
    state.height = cam.height;
    state.tile_size = ts;
    state.block_side = b;
    state.buckets = cfg.buckets;
    state.block_buckets.assign(static_cast<std::size_t>(block_count), BucketState{});
    state.grouping.reset();
    state.max_group = 0;
  }

  const int threads = resolve_threads(cfg.threads);
  const std::size_t record_bytes = record_bytes_for(cfg.sh_degree);
  FrameResult out;
  out.image = Image(cam.width, cam.height, cfg.background(0), cfg.background(1),
                    cfg.background(2));
  FrameMetrics& m = out.metrics;
  m.frame_index = state.frame_index;
  m.t = t;
  m.scene_size = scene.gaussians.size();

  // (1) Fetch.
  DramModel fetch_dram(record_bytes, cfg.burst_bytes);
  std::vector<std::uint32_t> fetched;
  if (cfg.flags.dr_fc) {
    if (!scene.layout) throw std::invalid_argument("render_frame: DR-FC requires a grid layout");
    if (scene.layout->record_count() != scene.gaussians.size())
      throw std::invalid_argument("render_frame: layout does not match scene");
    const auto visible = cull_grids(*scene.layout, make_frustum(cam, t, cfg.guard_px));
    const FetchSchedule sched = resolve_fetch(*scene.layout, visible);
    fetch_dram.price_schedule(sched.ranges);
    m.visible_cells = visible.size();
    m.fetch_ranges = sched.ranges.size();
    m.duplicates_skipped = sched.duplicates_skipped;
    fetched.reserve(sched.record_count);
    for (const AddrRange& r : sched.ranges)
      for (std::uint32_t a = r.begin; a < r.end; ++a) fetched.push_back(scene.layout->record_at[a]);
  } else {
    fetched.resize(scene.gaussians.size());
    for (std::uint32_t i = 0; i < fetched.size(); ++i) fetched[i] = i;
    fetch_dram.price_contiguous(fetched.size());
    m.fetch_ranges = fetched.empty() ? 0 : 1;
  }
  m.fetch = fetch_dram.counters();
  m.fetched = fetched.size();

  // (2) Slice, cull, project, shade.
  std::vector<Prepared> prep(fetched.size());
  const Vec3f campos = cam.position();
  parallel_for(fetched.size(), threads, [&](std::size_t i) {
    const Gaussian4D<float>& src = scene.gaussians[fetched[i]];
    prep[i] = cfg.quantize16
                  ? prepare(quantize_fp16(src), cam, campos, t, ts, tiles_x, tiles_y, cfg.tight_footprint)
                  : prepare(src, cam, campos, t, ts, tiles_x, tiles_y, cfg.tight_footprint);
  });
  std::vector<std::uint32_t> order;
  for (std::uint32_t i = 0; i < prep.size(); ++i) {
    switch (prep[i].fate) {
      case Fate::kTemporal: ++m.temporally_culled; break;
      case Fate::kFrustum: ++m.frustum_culled; break;
      case Fate::kSplatted: order.push_back(i); break;
    }
  }
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b2) {
    return prep[a].splat.id < prep[b2].splat.id;
  });
  std::vector<Prepared> splats;
  splats.reserve(order.size());
  for (std::uint32_t i : order) splats.push_back(prep[i]);
  prep.clear();
  prep.shrink_to_fit();
  m.splatted = splats.size();

  // (3) Tile/block binning; strength updates from block footprints.
  if (cfg.flags.atg) state.graph = ConnGraph(bw, bh, cfg.strength_cap);
  std::vector<std::vector<SortKey>> block_keys(static_cast<std::size_t>(block_count));
  std::vector<int> footprint;
  for (std::uint32_t i = 0; i < splats.size(); ++i) {
    const TileRect& r = splats[i].tiles;
    m.tile_entries += static_cast<std::uint64_t>(r.x1 - r.x0 + 1) * (r.y1 - r.y0 + 1);
    footprint.clear();
    for (int by = r.y0 / b; by <= r.y1 / b; ++by)
      for (int bx = r.x0 / b; bx <= r.x1 / b; ++bx) {
        const int blk = by * bw + bx;
        block_keys[static_cast<std::size_t>(blk)].push_back({splats[i].splat.depth, i});
        footprint.push_back(blk);
      }
    m.block_entries += footprint.size();
    if (cfg.flags.atg) state.graph.record_footprint(footprint);
  }

  // (4) Per-block sort.
  BucketState global_prior;
  if (cfg.flags.aii && !state.fresh()) global_prior = average_boundaries(state.block_buckets);
  std::vector<BlockSortResult> sorted(static_cast<std::size_t>(block_count));
  parallel_for(sorted.size(), threads, [&](std::size_t blk) {
    const auto& keys = block_keys[blk];
    if (keys.empty()) return;
    BucketState prior;
    if (cfg.flags.aii) {
      prior = state.block_buckets[blk];
      if (!prior.valid && !state.fresh())
        prior = seed_state(state.block_buckets, bw, bh, static_cast<int>(blk), global_prior);
    }
    sorted[blk] = sort_block(keys, prior, cfg.buckets);
  });
  for (std::size_t blk = 0; blk < sorted.size(); ++blk) {
    if (block_keys[blk].empty()) continue;
    m.sort += sorted[blk].stats;
    ++m.sorted_blocks;
    if (cfg.flags.aii) state.block_buckets[blk] = sorted[blk].next;
  }
  block_keys.clear();
  block_keys.shrink_to_fit();
  const std::vector<float> cuts = segment_cuts(sorted, cfg.buckets);

  // (5) Tile visiting order.
  std::vector<int> tile_order;
  tile_order.reserve(static_cast<std::size_t>(tiles_x) * tiles_y);
  if (cfg.flags.atg) {
    const ThresholdBounds tb = compute_threshold_bounds(state.graph, {cfg.k, cfg.udt});
    m.threshold = tb.threshold;
    if (!state.grouping) {
      if (cfg.max_group > 0) {
        state.max_group = cfg.max_group;
      } else {
        const double capacity = static_cast<double>(cfg.buffer_bytes / record_bytes);
        const double mean_ws =
            m.sorted_blocks ? static_cast<double>(m.block_entries) / m.sorted_blocks : 1.0;
        state.max_group = std::clamp(static_cast<int>(capacity / std::max(mean_ws, 1.0)), 1,
                                     cfg.max_group_cap);
      }
      state.grouping = group_full(state.graph, tb.threshold, state.max_group);
      m.full_regroup = true;
      m.regrouped_blocks = static_cast<std::uint64_t>(block_count);
    } else {
      IncrementalResult inc = group_incremental(*state.grouping, state.graph, tb.threshold);
      m.deform_count = static_cast<std::uint64_t>(inc.deform_count);
      m.regrouped_blocks = static_cast<std::uint64_t>(inc.regrouped_blocks);
      state.grouping = std::move(inc.grouping);
    }
    m.max_group = state.max_group;
    m.group_count = static_cast<std::uint64_t>(state.grouping->group_count());
    std::vector<int> tiles;
    for (const ScheduledGroup& grp : schedule(*state.grouping)) {
      tiles.clear();
      for (int blk : grp.blocks) {
        const int bx = blk % bw, by = blk / bw;
        for (int ty = by * b; ty < std::min((by + 1) * b, tiles_y); ++ty)
          for (int tx = bx * b; tx < std::min((bx + 1) * b, tiles_x); ++tx)
            tiles.push_back(ty * tiles_x + tx);
      }
      std::sort(tiles.begin(), tiles.end());
      tile_order.insert(tile_order.end(), tiles.begin(), tiles.end());
    }
  } else {
    for (int i = 0; i < tiles_x * tiles_y; ++i) tile_order.push_back(i);
    m.group_count = static_cast<std::uint64_t>(block_count);
  }

  // Per-tile front-to-back lists, filtered from the owning block's list.
  std::vector<std::vector<std::uint32_t>> tile_lists(static_cast<std::size_t>(tiles_x) * tiles_y);
  for (int ty = 0; ty < tiles_y; ++ty)
    for (int tx = 0; tx < tiles_x; ++tx) {
      const auto& blk = sorted[static_cast<std::size_t>((ty / b) * bw + tx / b)];
      auto& list = tile_lists[static_cast<std::size_t>(ty * tiles_x + tx)];
      for (const SortKey& k : blk.sorted)
        if (splats[k.id].tiles.contains(tx, ty)) list.push_back(k.id);
    }

  // (6a) Buffer traffic in visiting order: every list entry touches its
  // record once per tile.
  DramModel refetch(record_bytes, cfg.burst_bytes);
  BufferModel buffer(cfg.buffer_bytes, cfg.buckets, record_bytes);
  std::vector<std::uint16_t> segment(splats.size());
  for (std::size_t i = 0; i < splats.size(); ++i)
    segment[i] = static_cast<std::uint16_t>(assign_bucket(cuts, splats[i].splat.depth));
  for (int tile : tile_order)
    for (std::uint32_t i : tile_lists[static_cast<std::size_t>(tile)])
      buffer.access(splats[i].splat.id, segment[i], &refetch);
  m.refetch = refetch.counters();
  m.buffer = buffer.counters();

  // (6b) Pixel blending; tiles own disjoint pixels.
  const LutBank<float> luts(cfg.lut_precision);
  const float alpha_min = static_cast<float>(kAlphaMin);
  const float alpha_max = static_cast<float>(kAlphaMax);
  parallel_for(tile_lists.size(), threads, [&](std::size_t tile) {
    const auto& list = tile_lists[tile];
    const int tx = static_cast<int>(tile) % tiles_x, ty = static_cast<int>(tile) / tiles_x;
    for (int py = ty * ts; py < std::min((ty + 1) * ts, cam.height); ++py)
      for (int px = tx * ts; px < std::min((tx + 1) * ts, cam.width); ++px) {
        Compositor<float> acc;
        acc.term_eps = cfg.term_eps;
        const Vec2f pixel(static_cast<float>(px), static_cast<float>(py));
        for (std::uint32_t i : list) {
          if (acc.saturated()) break;
          const Prepared& p = splats[i];
          float alpha;
          if (cfg.flags.lut_exp) {
            const float dx = pixel(0) - p.splat.mean(0);
            const float dy = pixel(1) - p.splat.mean(1);
            const float x = p.ea * dx * dx + p.eb * dx * dy + p.ec * dy * dy + p.et;
            alpha = std::min(alpha_max, p.splat.opacity * exp2_lut(x, luts));
          } else {
            alpha = eval_alpha(p.splat, pixel);
          }
          if (alpha < alpha_min) continue;
          acc.add(alpha, p.splat.color);
        }
        float* dst = out.image.at(px, py);
        for (int c = 0; c < 3; ++c) dst[c] = acc.rgb(c) + acc.transmittance * cfg.background(c);
      }
  });

  m.dram_energy_pj = static_cast<double>(m.dram_bytes()) * cfg.energy.dram_pj_per_byte;
  m.sram_energy_pj = static_cast<double>(m.buffer.lookups) * static_cast<double>(record_bytes) *
                     cfg.energy.sram_pj_per_byte;

  // (7) State propagation.
  if (!cfg.flags.atg) state.grouping.reset();
  ++state.frame_index;
  return out;
}

}  // namespace splatsim
