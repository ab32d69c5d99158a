// Copyright 2026 The splatsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "splatsim/memcost.hpp"

#include <gtest/gtest.h>

#include <list>
#include <map>
#include <random>
#include <set>
#include <vector>

namespace splatsim {
namespace {

TEST(RecordBytes, PerDegree) {
  EXPECT_EQ(record_bytes_for(0), 36u);
  EXPECT_EQ(record_bytes_for(1), 54u);
  EXPECT_EQ(record_bytes_for(3), 126u);
  EXPECT_EQ(record_bytes_for(1, 4), 108u);
}

// Bursts touched by a byte walk over a contiguous run starting at a burst
// boundary.
std::uint64_t walked_bursts(std::uint64_t bytes, std::uint64_t burst) {
  std::set<std::uint64_t> touched;
  for (std::uint64_t b = 0; b < bytes; ++b) touched.insert(b / burst);
  return touched.size();
}

TEST(DramModel, BurstsMatchByteWalk) {
  for (std::size_t rec : {36, 54, 64, 126}) {
    for (std::size_t burst : {32, 64, 128}) {
      for (std::uint64_t n : {0, 1, 2, 3, 7, 50}) {
        DramModel d(rec, burst);
        d.price_contiguous(n);
        EXPECT_EQ(d.counters().bursts, walked_bursts(n * rec, burst));
        EXPECT_EQ(d.counters().bytes, n * rec);
        EXPECT_EQ(d.counters().records, n);
      }
    }
  }
}

TEST(DramModel, ScheduleSumsRanges) {
  DramModel d(54, 64);
  std::vector<AddrRange> r = {{10, 13}, {0, 1}, {20, 20}};
  d.price_schedule(r);
  // 162 B -> 3 bursts, 54 B -> 1 burst.
  EXPECT_EQ(d.counters().bursts, 4u);
  EXPECT_EQ(d.counters().records, 4u);
  std::vector<AddrRange> overlap = {{0, 5}, {4, 6}};
  EXPECT_THROW(d.price_schedule(overlap), std::invalid_argument);
  std::vector<AddrRange> inverted = {{5, 3}};
  EXPECT_THROW(d.price_schedule(inverted), std::invalid_argument);
  EXPECT_THROW(DramModel(0, 64), std::invalid_argument);
}

TEST(DramModel, CoalescingSavesBursts) {
  DramModel one(54, 64), many(54, 64);
  one.price_contiguous(32);
  for (int i = 0; i < 32; ++i) many.price_contiguous(1);
  EXPECT_EQ(one.counters().bytes, many.counters().bytes);
  EXPECT_EQ(one.counters().bursts, 27u);
  EXPECT_EQ(many.counters().bursts, 32u);
}

TEST(BufferModel, Geometry) {
  BufferModel b(262144, 8, 54);
  EXPECT_EQ(b.sets_per_segment(), 32768u / 108u);
  EXPECT_EQ(b.line_count(), 8u * (32768u / 108u) * 2u);
  EXPECT_THROW(BufferModel(100, 1, 54), std::invalid_argument);
  EXPECT_THROW(BufferModel(262144, 0, 54), std::invalid_argument);
  EXPECT_THROW(b.access(1, 8), std::out_of_range);
}

std::vector<std::uint32_t> ids_in_same_set(const BufferModel& b, std::size_t count) {
  std::map<std::size_t, std::vector<std::uint32_t>> by_set;
  for (std::uint32_t id = 0;; ++id) {
    auto& v = by_set[b.set_index(id)];
    v.push_back(id);
    if (v.size() == count) return v;
  }
}

TEST(BufferModel, ReuseExamples) {
  BufferModel b(4096, 1, 64);
  const auto ids = ids_in_same_set(b, 3);
  const std::uint32_t A = ids[0], B = ids[1], C = ids[2];
  DramModel d(64, 64);
  EXPECT_EQ(b.access(A, 0, &d), Access::kMiss);
  EXPECT_EQ(b.access(B, 0, &d), Access::kMiss);
  EXPECT_EQ(b.access(A, 0, &d), Access::kHit);
  EXPECT_EQ(d.counters().records, 2u);

  BufferModel c(4096, 1, 64);
  c.access(A, 0);
  c.access(B, 0);
  c.access(C, 0);  // evicts A, the least recently used
  EXPECT_EQ(c.access(A, 0), Access::kMiss);
  EXPECT_EQ(c.counters().evictions, 2u);
  EXPECT_EQ(c.counters().hits, 0u);
}

TEST(BufferModel, SegmentsAreIndependent) {
  BufferModel b(4096, 2, 64);
  EXPECT_EQ(b.access(5, 0), Access::kMiss);
  EXPECT_EQ(b.access(5, 1), Access::kMiss);
  EXPECT_EQ(b.access(5, 0), Access::kHit);
  EXPECT_EQ(b.access(5, 1), Access::kHit);
}

// Two-way LRU per (segment, set) with an explicit recency list.
struct ReplayOracle {
  std::map<std::pair<int, std::size_t>, std::list<std::uint32_t>> sets;
  std::uint64_t hits = 0, misses = 0, evictions = 0;

  void access(const BufferModel& geometry, std::uint32_t id, int segment) {
    auto& lru = sets[{segment, geometry.set_index(id)}];
    for (auto it = lru.begin(); it != lru.end(); ++it)
      if (*it == id) {
        lru.erase(it);
        lru.push_front(id);
        ++hits;
        return;
      }
    ++misses;
    if (lru.size() == 2) {
      lru.pop_back();
      ++evictions;
    }
    lru.push_front(id);
  }
};

TEST(BufferModel, MatchesTraceReplayOracle) {
  std::mt19937_64 rng(51);
  for (int segments : {1, 4, 16}) {
    for (std::uint32_t universe : {50u, 500u, 5000u}) {
      BufferModel b(16384, segments, 54);
      ReplayOracle oracle;
      DramModel d(54, 64);
      std::uniform_int_distribution<std::uint32_t> id(0, universe - 1);
      std::uniform_int_distribution<int> seg(0, segments - 1);
      for (int i = 0; i < 20000; ++i) {
        const std::uint32_t x = id(rng);
        const int s = seg(rng);
        oracle.access(b, x, s);
        b.access(x, s, &d);
      }
      EXPECT_EQ(b.counters().hits, oracle.hits);
      EXPECT_EQ(b.counters().misses, oracle.misses);
      EXPECT_EQ(b.counters().evictions, oracle.evictions);
      EXPECT_EQ(b.counters().lookups, 20000u);
      EXPECT_EQ(d.counters().records, oracle.misses);
    }
  }
}

TEST(Report, EnergyArithmetic) {
  DramModel d(54, 64);
  d.price_contiguous(10);
  BufferModel b(4096, 1, 54);
  for (std::uint32_t i = 0; i < 7; ++i) b.access(i, 0);
  const MetricRecord m = report(d, b, EnergyConfig{20.0, 1.5});
  EXPECT_DOUBLE_EQ(m.dram_energy_pj, 540.0 * 20.0);
  EXPECT_DOUBLE_EQ(m.sram_energy_pj, 7 * 54 * 1.5);
  EXPECT_DOUBLE_EQ(m.total_energy_pj(), 540.0 * 20.0 + 7 * 54 * 1.5);
  EXPECT_EQ(m.buffer.lookups, 7u);
}

}  // namespace
}  // namespace splatsim
