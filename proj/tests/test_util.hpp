// Copyright 2026 The splatsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatsim/gauss4d.hpp"

#include <random>

namespace splatsim::testing {

inline Mat4<double> random_spd4(std::mt19937_64& rng, double floor = 0.05) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat4<double> a;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = n(rng);
  Mat4<double> s = a * a.transpose() + floor * Mat4<double>::Identity();
  return (s + s.transpose()) / 2;
}

inline Mat3<double> random_rotation3(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

inline Mat4<double> random_rotation4(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat4<double> a;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = n(rng);
  Eigen::HouseholderQR<Mat4<double>> qr(a);
  return qr.householderQ();
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

}  // namespace splatsim::testing
