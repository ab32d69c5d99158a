// Copyright 2026 The splatsim Authors
// SPDX-License-Identifier: Apache-2.0

// Access-exact memory accounting: DRAM bursts for fetch schedules and
// re-fetches, and the depth-segmented 2-way set-associative blend buffer.

#pragma once

#include "splatsim/frustum_grid.hpp"
#include "splatsim/gauss4d.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace splatsim {

inline constexpr std::size_t kDefaultBurstBytes = 64;
inline constexpr std::size_t kDefaultBufferBytes = 262144;
inline constexpr std::size_t kStorageBytesPerScalar = 2;

/// Bytes of one stored Gaussian: mean (4), covariance (10), opacity (1) and
/// 3·(deg+1)² SH scalars, each at 16-bit storage.
constexpr std::size_t record_bytes_for(int sh_degree,
                                       std::size_t bytes_per_scalar = kStorageBytesPerScalar) {
  return (4 + 10 + 1 + 3 * static_cast<std::size_t>(sh_coeff_count(sh_degree))) *
         bytes_per_scalar;
}

struct DramCounters {
  std::uint64_t records = 0;
  std::uint64_t bursts = 0;
  std::uint64_t bytes = 0;
};

class DramModel {
 public:
  DramModel(std::size_t record_bytes, std::size_t burst_bytes = kDefaultBurstBytes)
      : record_bytes_(record_bytes), burst_bytes_(burst_bytes) {
    if (record_bytes == 0 || burst_bytes == 0)
      throw std::invalid_argument("DramModel: zero record or burst size");
  }

  std::size_t record_bytes() const { return record_bytes_; }
  std::size_t burst_bytes() const { return burst_bytes_; }
  const DramCounters& counters() const { return counters_; }

  /// Prices one contiguous read of `records` records.
  void price_contiguous(std::uint64_t records) {
    if (records == 0) return;
    const std::uint64_t bytes = records * record_bytes_;
    counters_.records += records;
    counters_.bytes += bytes;
    counters_.bursts += (bytes + burst_bytes_ - 1) / burst_bytes_;
  }

  /// Rejects overlapping ranges.
  void price_schedule(std::span<const AddrRange> ranges) {
    std::vector<AddrRange> sorted(ranges.begin(), ranges.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const AddrRange& a, const AddrRange& b) { return a.begin < b.begin; });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (sorted[i].end < sorted[i].begin)
        throw std::invalid_argument("price_schedule: inverted range");
      if (i > 0 && sorted[i].begin < sorted[i - 1].end)
        throw std::invalid_argument("price_schedule: overlapping ranges");
    }
    for (const AddrRange& r : ranges) price_contiguous(r.size());
  }

 private:
  std::size_t record_bytes_;
  std::size_t burst_bytes_;
  DramCounters counters_;
};

enum class Access : std::uint8_t { kHit, kMiss };

struct BufferCounters {
  std::uint64_t lookups = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t evictions = 0;
};

/// On-chip buffer split into N equal depth segments; each segment is a
/// 2-way set-associative cache of whole records with LRU replacement.
class BufferModel {
 public:
  static constexpr int kWays = 2;

  BufferModel(std::size_t capacity_bytes, int segments, std::size_t record_bytes)
      : capacity_bytes_(capacity_bytes), segments_(segments), record_bytes_(record_bytes) {
    if (segments < 1) throw std::invalid_argument("BufferModel: segments must be >= 1");
    if (record_bytes == 0) throw std::invalid_argument("BufferModel: zero record size");
    const std::size_t segment_bytes = capacity_bytes / static_cast<std::size_t>(segments);
    sets_ = segment_bytes / (kWays * record_bytes);
    if (sets_ == 0)
      throw std::invalid_argument("BufferModel: record larger than half a set's capacity");
    lines_.assign(static_cast<std::size_t>(segments) * sets_ * kWays, Line{});
  }

  int segments() const { return segments_; }
  std::size_t sets_per_segment() const { return sets_; }
  std::size_t capacity_bytes() const { return capacity_bytes_; }
  std::size_t record_bytes() const { return record_bytes_; }
  std::size_t line_count() const { return lines_.size(); }
  const BufferCounters& counters() const { return counters_; }

  std::size_t set_index(std::uint32_t id) const {
    const std::uint64_t h = static_cast<std::uint64_t>(id) * 0x9E3779B97F4A7C15ull;
    return static_cast<std::size_t>((h >> 32) % sets_);
  }

  /// Looks up a record in its depth segment. A miss evicts the LRU way and
  /// prices one record re-fetch on `dram` when given.
  Access access(std::uint32_t id, int segment, DramModel* dram = nullptr) {
    if (segment < 0 || segment >= segments_)
      throw std::out_of_range("BufferModel::access: segment");
    ++counters_.lookups;
    ++tick_;
    Line* set = &lines_[(static_cast<std::size_t>(segment) * sets_ + set_index(id)) * kWays];
    for (int w = 0; w < kWays; ++w)
      if (set[w].valid && set[w].id == id) {
        set[w].last_use = tick_;
        ++counters_.hits;
        return Access::kHit;
      }
    ++counters_.misses;
    Line* victim = &set[0];
    for (int w = 1; w < kWays; ++w) {
      if (!victim->valid) break;
      if (!set[w].valid || set[w].last_use < victim->last_use) victim = &set[w];
    }
    if (victim->valid) ++counters_.evictions;
    *victim = Line{id, tick_, true};
    if (dram) dram->price_contiguous(1);
    return Access::kMiss;
  }

 private:
  struct Line {
    std::uint32_t id = 0;
    std::uint64_t last_use = 0;
    bool valid = false;
  };

  std::size_t capacity_bytes_;
  int segments_;
  std::size_t record_bytes_;
  std::size_t sets_ = 0;
  std::uint64_t tick_ = 0;
  std::vector<Line> lines_;
  BufferCounters counters_;
};

/// Illustrative per-byte energies, not calibrated to any chip.
struct EnergyConfig {
  double dram_pj_per_byte = 20.0;
  double sram_pj_per_byte = 1.0;
};

struct MetricRecord {
  DramCounters dram;
  BufferCounters buffer;
  double dram_energy_pj = 0;
  double sram_energy_pj = 0;
  double total_energy_pj() const { return dram_energy_pj + sram_energy_pj; }
};

/// Snapshot of the counters with energy-weighted totals. SRAM energy is
/// charged per record lookup.
inline MetricRecord report(const DramModel& dram, const BufferModel& buf,
                           const EnergyConfig& energy) {
  MetricRecord m;
  m.dram = dram.counters();
  m.buffer = buf.counters();
  m.dram_energy_pj = static_cast<double>(m.dram.bytes) * energy.dram_pj_per_byte;
  m.sram_energy_pj = static_cast<double>(m.buffer.lookups) *
                     static_cast<double>(buf.record_bytes()) * energy.sram_pj_per_byte;
  return m;
}

}  // namespace splatsim
