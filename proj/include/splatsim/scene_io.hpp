// Copyright 2026 The splatsim Authors
// SPDX-License-Identifier: Apache-2.0

// G4DS scene container.
//
//   header   "G4DS" u32 version u32 count u32 sh_degree u32 flags
//   record   f32 mu[4]  u32 tag  payload  f32 opacity  f32 sh[3·(d+1)²]
//            tag 0: f32 cov[10], upper triangle row by row
//            tag 1: f32 scale[4] f32 q_left[4] f32 q_right[4], (w,x,y,z)
//   appendix (flags bit 1) serialized GridLayout
//
// Everything is little-endian. flags bit 0 marks a dynamic scene; static
// scenes keep mu_t = 0.5 and an infinite time variance with zero cross
// terms.

#pragma once

#include "splatsim/frustum_grid.hpp"
#include "splatsim/gauss4d.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace splatsim {

inline constexpr std::array<char, 4> kSceneMagic = {'G', '4', 'D', 'S'};
inline constexpr std::uint32_t kSceneVersion = 1;
inline constexpr std::uint32_t kSceneFlagDynamic = 1u << 0;
inline constexpr std::uint32_t kSceneFlagLayout = 1u << 1;

class SceneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CovEncoding : std::uint32_t { kRaw = 0, kRotor = 1 };

/// One record as stored, so that re-saving reproduces the input bytes.
struct SceneRecord {
  Vec4f mean = Vec4f::Zero();
  CovEncoding encoding = CovEncoding::kRaw;
  /// 10 upper-triangle entries (raw) or scales, q_left, q_right (rotor).
  std::array<float, 12> payload{};
  float opacity = 1;
  std::vector<Vec3f> sh;

  std::size_t payload_size() const { return encoding == CovEncoding::kRaw ? 10 : 12; }
};

struct SceneFile {
  std::uint32_t version = kSceneVersion;
  int sh_degree = 0;
  bool dynamic = true;
  std::vector<SceneRecord> records;
  std::optional<GridLayout> layout;
};

namespace scene_detail {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}
  std::uint32_t u32(const char* what) {
    if (pos_ + 4 > bytes_.size()) throw SceneError("truncated file while reading " + std::string(what));
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  const char* take(std::size_t n, const char* what) {
    if (pos_ + n > bytes_.size()) throw SceneError("truncated file while reading " + std::string(what));
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

 private:
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

inline constexpr std::array<std::pair<int, int>, 10> kUpper = {
    {{0, 0}, {0, 1}, {0, 2}, {0, 3}, {1, 1}, {1, 2}, {1, 3}, {2, 2}, {2, 3}, {3, 3}}};

inline std::string record_error(std::size_t i, const std::string& what) {
  return "record " + std::to_string(i) + ": " + what;
}

}  // namespace scene_detail

inline std::vector<char> serialize_scene(const SceneFile& f) {
  using scene_detail::Writer;
  Writer w;
  w.raw(kSceneMagic.data(), kSceneMagic.size());
  w.u32(f.version);
  w.u32(static_cast<std::uint32_t>(f.records.size()));
  w.u32(static_cast<std::uint32_t>(f.sh_degree));
  w.u32((f.dynamic ? kSceneFlagDynamic : 0u) | (f.layout ? kSceneFlagLayout : 0u));
  const std::size_t sh_count = static_cast<std::size_t>(sh_coeff_count(f.sh_degree));
  for (std::size_t i = 0; i < f.records.size(); ++i) {
    const SceneRecord& r = f.records[i];
    if (r.sh.size() != sh_count)
      throw SceneError(scene_detail::record_error(i, "SH count does not match scene degree"));
    for (int k = 0; k < 4; ++k) w.f32(r.mean(k));
    w.u32(static_cast<std::uint32_t>(r.encoding));
    for (std::size_t k = 0; k < r.payload_size(); ++k) w.f32(r.payload[k]);
    w.f32(r.opacity);
    for (const Vec3f& c : r.sh)
      for (int k = 0; k < 3; ++k) w.f32(c(k));
  }
  if (f.layout) {
    const GridLayout& l = *f.layout;
    w.u32(static_cast<std::uint32_t>(l.grid_n));
    w.f32(l.support_sigma);
    for (int a = 0; a < 3; ++a) w.f32(l.scene_aabb.lo(a));
    for (int a = 0; a < 3; ++a) w.f32(l.scene_aabb.hi(a));
    for (const CubicCell& c : l.cells) {
      w.u32(c.home.begin);
      w.u32(c.home.end);
      w.u32(static_cast<std::uint32_t>(c.spills.size()));
      for (const SpillRun& s : c.spills) {
        w.u32(s.owner);
        w.u32(s.range.begin);
        w.u32(s.range.end);
      }
    }
    for (std::uint32_t a : l.record_at) w.u32(a);
  }
  return w.bytes();
}

inline SceneFile parse_scene(std::vector<char> bytes) {
  using scene_detail::Reader;
  Reader r(std::move(bytes));
  const char* magic = r.take(4, "magic");
  if (!std::equal(kSceneMagic.begin(), kSceneMagic.end(), magic))
    throw SceneError("bad magic: not a G4DS scene");
  SceneFile f;
  f.version = r.u32("version");
  if (f.version != kSceneVersion)
    throw SceneError("unsupported version " + std::to_string(f.version));
  const std::uint32_t count = r.u32("count");
  const std::uint32_t degree = r.u32("sh_degree");
  if (degree > static_cast<std::uint32_t>(kMaxShDegree))
    throw SceneError("unsupported SH degree " + std::to_string(degree));
  f.sh_degree = static_cast<int>(degree);
  const std::uint32_t flags = r.u32("flags");
  if (flags & ~(kSceneFlagDynamic | kSceneFlagLayout))
    throw SceneError("unknown header flags");
  f.dynamic = (flags & kSceneFlagDynamic) != 0;
  const std::size_t sh_count = static_cast<std::size_t>(sh_coeff_count(f.sh_degree));
  // Smallest record: 4 + 1 + 10 + 1 + 3·sh scalars.
  if (static_cast<std::uint64_t>(count) * (16 + 3 * sh_count) * 4 > r.remaining())
    throw SceneError("count " + std::to_string(count) + " exceeds payload length");
  f.records.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    SceneRecord& rec = f.records[i];
    for (int k = 0; k < 4; ++k) rec.mean(k) = r.f32("mean");
    const std::uint32_t tag = r.u32("covariance tag");
    if (tag > 1) throw SceneError(scene_detail::record_error(i, "unknown covariance tag " + std::to_string(tag)));
    rec.encoding = static_cast<CovEncoding>(tag);
    for (std::size_t k = 0; k < rec.payload_size(); ++k) rec.payload[k] = r.f32("covariance");
    rec.opacity = r.f32("opacity");
    rec.sh.resize(sh_count);
    for (Vec3f& c : rec.sh)
      for (int k = 0; k < 3; ++k) c(k) = r.f32("sh");
  }
  if (flags & kSceneFlagLayout) {
    GridLayout l;
    const std::uint32_t n = r.u32("layout grid_n");
    if (n < 1 || n > 64) throw SceneError("layout: invalid grid_n " + std::to_string(n));
    l.grid_n = static_cast<int>(n);
    l.support_sigma = r.f32("layout sigma");
    for (int a = 0; a < 3; ++a) l.scene_aabb.lo(a) = r.f32("layout bounds");
    for (int a = 0; a < 3; ++a) l.scene_aabb.hi(a) = r.f32("layout bounds");
    init_cells(l);
    for (CubicCell& c : l.cells) {
      c.home.begin = r.u32("layout cell");
      c.home.end = r.u32("layout cell");
      const std::uint32_t spills = r.u32("layout cell");
      if (c.home.end < c.home.begin || c.home.end > count || spills > count)
        throw SceneError("layout: corrupt cell entry");
      c.spills.resize(spills);
      for (SpillRun& s : c.spills) {
        s.owner = r.u32("layout spill");
        s.range.begin = r.u32("layout spill");
        s.range.end = r.u32("layout spill");
        if (s.owner >= l.cells.size() || s.range.end <= s.range.begin || s.range.end > count)
          throw SceneError("layout: corrupt spill run");
      }
    }
    l.record_at.resize(count);
    l.address_of.assign(count, std::numeric_limits<std::uint32_t>::max());
    for (std::uint32_t a = 0; a < count; ++a) {
      const std::uint32_t idx = r.u32("layout record order");
      if (idx >= count || l.address_of[idx] != std::numeric_limits<std::uint32_t>::max())
        throw SceneError("layout: record order is not a permutation");
      l.record_at[a] = idx;
      l.address_of[idx] = a;
    }
    f.layout = std::move(l);
  }
  if (!r.at_end()) throw SceneError("trailing bytes after scene payload");
  return f;
}

inline SceneFile read_scene_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SceneError("cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_scene(std::move(bytes));
}

inline void write_scene_file(const std::string& path, const SceneFile& f) {
  const std::vector<char> bytes = serialize_scene(f);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SceneError("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw SceneError("write failed: " + path);
}

/// Expands and validates one record. Static scenes discard any space-time
/// coupling and install the infinite time variance.
inline Gaussian4D<float> decode_record(const SceneRecord& rec, bool dynamic, std::uint32_t id) {
  Gaussian4D<float> g;
  g.mean = rec.mean;
  g.opacity = rec.opacity;
  g.sh = rec.sh;
  g.id = id;
  if (rec.encoding == CovEncoding::kRaw) {
    for (std::size_t k = 0; k < scene_detail::kUpper.size(); ++k) {
      const auto [i, j] = scene_detail::kUpper[k];
      g.cov(i, j) = g.cov(j, i) = rec.payload[k];
    }
  } else {
    const Vec4f s(rec.payload[0], rec.payload[1], rec.payload[2], rec.payload[3]);
    const Vec4f ql(rec.payload[4], rec.payload[5], rec.payload[6], rec.payload[7]);
    const Vec4f qr(rec.payload[8], rec.payload[9], rec.payload[10], rec.payload[11]);
    if (!static_cast<bool>(s.allFinite() && ql.allFinite() && qr.allFinite()))
      throw std::invalid_argument("non-finite rotor parameters");
    const Mat4<double> u = rotor_rotation<double>(ql.cast<double>(), qr.cast<double>());
    g.cov = build_cov4<double>(u, s.cast<double>()).cast<float>();
  }
  if (!dynamic) {
    for (int i = 0; i < 3; ++i) g.cov(i, 3) = g.cov(3, i) = 0;
    g.cov(3, 3) = std::numeric_limits<float>::infinity();
  }
  return g;
}

inline std::vector<Gaussian4D<float>> decode_scene(const SceneFile& f) {
  std::vector<Gaussian4D<float>> out;
  out.reserve(f.records.size());
  for (std::size_t i = 0; i < f.records.size(); ++i) {
    try {
      out.push_back(decode_record(f.records[i], f.dynamic, static_cast<std::uint32_t>(i)));
      validate_gaussian(out.back());
    } catch (const std::invalid_argument& e) {
      throw SceneError(scene_detail::record_error(i, e.what()));
    }
  }
  return out;
}

/// Raw-encoded records for a Gaussian list (ids become record indices).
inline SceneFile encode_scene(std::span<const Gaussian4D<float>> scene, int sh_degree,
                              bool dynamic) {
  SceneFile f;
  f.sh_degree = sh_degree;
  f.dynamic = dynamic;
  f.records.reserve(scene.size());
  for (const auto& g : scene) {
    SceneRecord r;
    r.mean = g.mean;
    if (!dynamic) r.mean(3) = 0.5f;
    r.encoding = CovEncoding::kRaw;
    for (std::size_t k = 0; k < scene_detail::kUpper.size(); ++k) {
      const auto [i, j] = scene_detail::kUpper[k];
      r.payload[k] = g.cov(i, j);
    }
    if (!dynamic) {
      r.payload[3] = r.payload[6] = r.payload[8] = 0.0f;
      r.payload[9] = std::numeric_limits<float>::infinity();
    }
    r.opacity = g.opacity;
    r.sh = g.sh;
    f.records.push_back(std::move(r));
  }
  return f;
}

struct LoadedScene {
  std::vector<Gaussian4D<float>> gaussians;
  std::optional<GridLayout> layout;
  int sh_degree = 0;
  bool dynamic = true;
};

inline LoadedScene load_scene(const std::string& path) {
  SceneFile f = read_scene_file(path);
  LoadedScene s;
  s.gaussians = decode_scene(f);
  s.layout = std::move(f.layout);
  s.sh_degree = f.sh_degree;
  s.dynamic = f.dynamic;
  return s;
}

}  // namespace splatsim
