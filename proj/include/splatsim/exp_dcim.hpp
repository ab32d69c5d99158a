// Copyright 2026 The splatsim Authors
// SPDX-License-Identifier: Apache-2.0

// Bit-exact emulation of the compute-in-memory exponential path:
//
//   e^x  ->  2^x'           with x' = x·log2(e) folded into stored factors
//   2^x' ->  2^int · 2^frac with frac held as a 12-bit fixed-point field
//   2^frac = T0[f1]·T1[f2]·T2[f3]·T3[f4], four cascaded 8-entry tables
//
// Negative exponents need no special casing: flooring the fixed-point
// value moves the borrow into the integer part and leaves a non-negative
// fraction (the two's-complement identity 2^-0.25 = 2^-1 · 2^0.75).

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace splatsim {

enum class LutPrecision {
  kExact,  ///< entries rounded once to the working type
  kHalf,   ///< entries rounded to IEEE binary16 first
};

inline constexpr int kLutSegments = 4;
inline constexpr int kLutEntries = 8;
inline constexpr int kLutFieldBits = 3;
inline constexpr int kFracBits = kLutSegments * kLutFieldBits;  // 12
inline constexpr std::uint32_t kFracOne = 1u << kFracBits;      // 4096
/// |x'| at or beyond this saturates.
inline constexpr double kExpRangeGuard = 16384.0;  // 2^14

/// Rounds a positive normal value to 11 significant bits (binary16
/// mantissa), nearest-even.
inline double round_to_half_precision(double v) {
  if (v == 0.0 || !std::isfinite(v)) return v;
  int e = 0;
  const double m = std::frexp(v, &e);  // m in [0.5, 1)
  return std::ldexp(std::nearbyint(std::ldexp(m, 11)), e - 11);
}

template <typename T = float>
class LutBank {
 public:
  explicit LutBank(LutPrecision precision = LutPrecision::kExact) : precision_(precision) {
    for (int k = 0; k < kLutSegments; ++k)
      for (int j = 0; j < kLutEntries; ++j) {
        const long double step = std::ldexp(1.0L, -kLutFieldBits * (k + 1));
        double v = static_cast<double>(std::exp2(static_cast<long double>(j) * step));
        if (precision == LutPrecision::kHalf) v = round_to_half_precision(v);
        table_[k][j] = static_cast<T>(v);
      }
  }

  T entry(int segment, int index) const { return table_.at(segment).at(index); }
  LutPrecision precision() const { return precision_; }

 private:
  LutPrecision precision_;
  std::array<std::array<T, kLutEntries>, kLutSegments> table_{};
};

enum class Saturation : std::uint8_t { kNone, kUnderflow, kOverflow };

/// Sign-integer-fraction split of a base-2 exponent.
struct SifDecomp {
  std::int32_t int_part = 0;
  std::uint32_t frac12 = 0;  ///< fraction in units of 2^-12, < 4096
  Saturation saturation = Saturation::kNone;
};

/// Rounds x'·2^12 to nearest-even, then splits with floor/mod.
inline SifDecomp decompose(double x_prime) {
  SifDecomp d;
  if (std::isnan(x_prime)) throw std::invalid_argument("decompose: NaN exponent");
  if (x_prime <= -kExpRangeGuard) {
    d.saturation = Saturation::kUnderflow;
    return d;
  }
  if (x_prime >= kExpRangeGuard) {
    d.saturation = Saturation::kOverflow;
    return d;
  }
  const auto fixed = static_cast<std::int64_t>(std::nearbyint(std::ldexp(x_prime, kFracBits)));
  d.int_part = static_cast<std::int32_t>(fixed >> kFracBits);
  d.frac12 = static_cast<std::uint32_t>(fixed & (kFracOne - 1));
  return d;
}

/// 2^(frac12 / 4096) through the four cascaded tables, MSB field first.
template <typename T>
T exp2_frac(std::uint32_t frac12, const LutBank<T>& luts) {
  T r = luts.entry(0, static_cast<int>((frac12 >> 9) & 7u));
  r *= luts.entry(1, static_cast<int>((frac12 >> 6) & 7u));
  r *= luts.entry(2, static_cast<int>((frac12 >> 3) & 7u));
  r *= luts.entry(3, static_cast<int>(frac12 & 7u));
  return r;
}

/// 2^x' with the integer part applied as exponent-field arithmetic.
template <typename T>
T exp2_lut(T x_prime, const LutBank<T>& luts, Saturation* flag = nullptr) {
  const SifDecomp d = decompose(static_cast<double>(x_prime));
  if (flag) *flag = d.saturation;
  if (d.saturation == Saturation::kUnderflow) return T(0);
  if (d.saturation == Saturation::kOverflow) return std::numeric_limits<T>::max();
  return std::ldexp(exp2_frac(d.frac12, luts), d.int_part);
}

/// e^x via base conversion. The renderer avoids this multiply by folding
/// log2(e) into per-splat factors during preprocessing.
template <typename T>
T exp_e(T x, const LutBank<T>& luts, Saturation* flag = nullptr) {
  return exp2_lut(static_cast<T>(x * std::numbers::log2e_v<T>), luts, flag);
}

/// The single exponent fed to exp_e for alpha: log of the product of the
/// spatial and temporal Gaussian factors.
template <typename T>
T merged_alpha_exponent(T spatial_q, T temporal_q) {
  return -(spatial_q + temporal_q) / T(2);
}

/// Distance in units in the last place of `reference` (as a T value).
template <typename T>
double ulp_distance(double value, double reference) {
  const int e = std::ilogb(reference);
  const double ulp = std::ldexp(1.0, e - (std::numeric_limits<T>::digits - 1));
  return std::abs(value - reference) / ulp;
}

struct LutAudit {
  std::vector<double> rel_error;  ///< per frac12 value, 4096 entries
  double max_rel_error = 0;
  double max_ulp = 0;
  std::uint32_t argmax = 0;
};

/// Exhaustive sweep of every 12-bit fraction against exact 2^(f/4096).
template <typename T>
LutAudit audit_lut(const LutBank<T>& luts) {
  LutAudit a;
  a.rel_error.resize(kFracOne);
  for (std::uint32_t f = 0; f < kFracOne; ++f) {
    const long double exact = std::exp2(static_cast<long double>(f) / kFracOne);
    const double got = static_cast<double>(exp2_frac(f, luts));
    const double rel = static_cast<double>(std::abs((got - exact) / exact));
    a.rel_error[f] = rel;
    const double u = ulp_distance<T>(got, static_cast<double>(exact));
    if (rel > a.max_rel_error) {
      a.max_rel_error = rel;
      a.argmax = f;
    }
    a.max_ulp = std::max(a.max_ulp, u);
  }
  return a;
}

}  // namespace splatsim
