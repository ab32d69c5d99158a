// Copyright 2026 The splatsim Authors
// SPDX-License-Identifier: Apache-2.0

// Bucket scatter followed by a bitonic network per bucket. Bucket cuts are
// either re-derived every frame from a min/max pre-scan (uniform reinit) or
// carried over from the previous frame's realized quantiles.

#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace splatsim {

struct SortKey {
  float depth = 0;
  std::uint32_t id = 0;

  friend bool operator<(const SortKey& a, const SortKey& b) {
    return a.depth < b.depth || (a.depth == b.depth && a.id < b.id);
  }
  friend bool operator==(const SortKey&, const SortKey&) = default;
};

/// Cut depths of one tile block. N buckets use N-1 non-decreasing cuts.
struct BucketState {
  std::vector<float> boundaries;
  bool valid = false;
};

struct SortStats {
  /// Bucket scatters plus min/max pre-scan reads.
  std::uint64_t scatter_ops = 0;
  /// Number of min/max pre-scans performed.
  std::uint64_t range_scans = 0;
  std::uint64_t compare_exchanges = 0;
  /// Network depth summed over every bucket.
  std::uint64_t stages = 0;
  std::uint64_t max_bucket = 0;
  /// Deepest bucket network of each sorted block, summed over blocks:
  /// latency when a block's buckets run on parallel networks.
  std::uint64_t critical_stages = 0;
  /// Largest per-bucket compare-exchange count, summed over blocks.
  std::uint64_t critical_compare_exchanges = 0;

  SortStats& operator+=(const SortStats& o) {
    scatter_ops += o.scatter_ops;
    range_scans += o.range_scans;
    compare_exchanges += o.compare_exchanges;
    stages += o.stages;
    max_bucket = std::max(max_bucket, o.max_bucket);
    critical_stages += o.critical_stages;
    critical_compare_exchanges += o.critical_compare_exchanges;
    return *this;
  }
};

/// log2(m)·(log2(m)+1)/2 for the power of two m >= n.
inline std::uint64_t bitonic_stage_count(std::size_t n) {
  if (n <= 1) return 0;
  const auto lg = static_cast<std::uint64_t>(std::bit_width(std::bit_ceil(n)) - 1);
  return lg * (lg + 1) / 2;
}

inline std::uint64_t bitonic_compare_exchange_count(std::size_t n) {
  if (n <= 1) return 0;
  return static_cast<std::uint64_t>(std::bit_ceil(n) / 2) * bitonic_stage_count(n);
}

inline bool is_valid_bucket_count(int n) {
  return n >= 2 && std::has_single_bit(static_cast<unsigned>(n));
}

/// N-1 equally spaced cuts in (min_d, max_d). A zero-width range yields
/// +inf cuts so every key lands in bucket 0.
inline std::vector<float> init_uniform(float min_d, float max_d, int buckets) {
  if (!is_valid_bucket_count(buckets))
    throw std::invalid_argument("init_uniform: bucket count must be a power of two >= 2");
  if (!(min_d < max_d)) {
    if (min_d == max_d)
      return std::vector<float>(static_cast<std::size_t>(buckets - 1),
                                std::numeric_limits<float>::infinity());
    throw std::invalid_argument("init_uniform: min_d > max_d");
  }
  std::vector<float> cuts(static_cast<std::size_t>(buckets - 1));
  for (int i = 1; i < buckets; ++i)
    cuts[static_cast<std::size_t>(i - 1)] =
        min_d + (max_d - min_d) * static_cast<float>(i) / static_cast<float>(buckets);
  return cuts;
}

/// Index of the half-open bucket holding depth; out-of-range keys clamp to
/// the first or last bucket.
inline int assign_bucket(std::span<const float> boundaries, float depth) {
  return static_cast<int>(std::upper_bound(boundaries.begin(), boundaries.end(), depth) -
                          boundaries.begin());
}

/// Sorts ascending by (depth, id) through a full bitonic network over the
/// input padded to a power of two with +inf sentinels.
inline std::pair<std::vector<SortKey>, SortStats> bitonic_sort(std::span<const SortKey> keys) {
  SortStats stats;
  const std::size_t n = keys.size();
  if (n == 0) return {{}, stats};
  const std::size_t m = std::bit_ceil(n);
  std::vector<SortKey> a(keys.begin(), keys.end());
  a.resize(m, SortKey{std::numeric_limits<float>::infinity(),
                      std::numeric_limits<std::uint32_t>::max()});
  for (std::size_t k = 2; k <= m; k <<= 1) {
    for (std::size_t j = k >> 1; j > 0; j >>= 1) {
      ++stats.stages;
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t l = i ^ j;
        if (l <= i) continue;
        ++stats.compare_exchanges;
        const bool ascending = (i & k) == 0;
        if (ascending ? (a[l] < a[i]) : (a[i] < a[l])) std::swap(a[i], a[l]);
      }
    }
  }
  a.resize(n);
  stats.max_bucket = n;
  stats.critical_stages = stats.stages;
  stats.critical_compare_exchanges = stats.compare_exchanges;
  return {std::move(a), stats};
}

struct BlockSortResult {
  std::vector<SortKey> sorted;
  /// Bucket index of each entry of `sorted`.
  std::vector<std::uint16_t> bucket;
  /// Cuts used for this frame's scatter.
  std::vector<float> used_boundaries;
  SortStats stats;
  BucketState next;
};

/// Equal-count quantile cuts of an ascending list: cut i is the
/// ceil(i·n/N)-th order statistic.
inline std::vector<float> quantile_boundaries(std::span<const SortKey> sorted, int buckets) {
  std::vector<float> cuts(static_cast<std::size_t>(buckets - 1));
  const std::size_t n = sorted.size();
  for (int i = 1; i < buckets; ++i) {
    std::size_t rank = (static_cast<std::size_t>(i) * n + buckets - 1) / buckets;
    rank = std::max<std::size_t>(rank, 1);
    cuts[static_cast<std::size_t>(i - 1)] = sorted[rank - 1].depth;
  }
  return cuts;
}

/// One tile block's sort. An invalid state triggers the min/max pre-scan and
/// uniform cuts; a valid one is used as-is.
inline BlockSortResult sort_block(std::span<const SortKey> keys, const BucketState& state,
                                  int buckets) {
  if (!is_valid_bucket_count(buckets))
    throw std::invalid_argument("sort_block: bucket count must be a power of two >= 2");
  BlockSortResult r;
  if (keys.empty()) {
    r.next = state;
    return r;
  }
  if (state.valid) {
    if (state.boundaries.size() != static_cast<std::size_t>(buckets - 1))
      throw std::invalid_argument("sort_block: state does not match bucket count");
    r.used_boundaries = state.boundaries;
  } else {
    float lo = keys[0].depth, hi = keys[0].depth;
    for (const SortKey& k : keys) {
      lo = std::min(lo, k.depth);
      hi = std::max(hi, k.depth);
    }
    r.stats.scatter_ops += keys.size();
    r.stats.range_scans = 1;
    r.used_boundaries = init_uniform(lo, hi, buckets);
  }

  std::vector<std::vector<SortKey>> bins(static_cast<std::size_t>(buckets));
  for (const SortKey& k : keys) {
    bins[static_cast<std::size_t>(assign_bucket(r.used_boundaries, k.depth))].push_back(k);
    ++r.stats.scatter_ops;
  }
  r.sorted.reserve(keys.size());
  r.bucket.reserve(keys.size());
  for (std::size_t b = 0; b < bins.size(); ++b) {
    auto [sorted, s] = bitonic_sort(bins[b]);
    r.stats.compare_exchanges += s.compare_exchanges;
    r.stats.stages += s.stages;
    r.stats.max_bucket = std::max(r.stats.max_bucket, s.max_bucket);
    r.stats.critical_stages = std::max(r.stats.critical_stages, s.stages);
    r.stats.critical_compare_exchanges =
        std::max(r.stats.critical_compare_exchanges, s.compare_exchanges);
    r.sorted.insert(r.sorted.end(), sorted.begin(), sorted.end());
    r.bucket.insert(r.bucket.end(), sorted.size(), static_cast<std::uint16_t>(b));
  }
  r.next.boundaries = quantile_boundaries(r.sorted, buckets);
  r.next.valid = true;
  return r;
}

/// Element-wise mean of the valid states' cuts, re-sorted ascending.
/// Returns an invalid state when no input is valid.
inline BucketState average_boundaries(std::span<const BucketState> states) {
  BucketState out;
  std::size_t count = 0;
  for (const BucketState& s : states) {
    if (!s.valid) continue;
    if (out.boundaries.empty()) out.boundaries.assign(s.boundaries.size(), 0.0f);
    if (s.boundaries.size() != out.boundaries.size())
      throw std::invalid_argument("average_boundaries: mismatched bucket counts");
    for (std::size_t i = 0; i < s.boundaries.size(); ++i) out.boundaries[i] += s.boundaries[i];
    ++count;
  }
  if (count == 0) return out;
  for (float& b : out.boundaries) b /= static_cast<float>(count);
  std::sort(out.boundaries.begin(), out.boundaries.end());
  out.valid = true;
  return out;
}

}  // namespace splatsim
