// Copyright 2026 The splatsim Authors
// SPDX-License-Identifier: Apache-2.0

// Continuous math of dynamic Gaussian splatting: 4D kernels, temporal
// slicing to 3D, perspective projection to 2D splats, spherical-harmonic
// color and front-to-back alpha compositing.
//
// Everything here is templated on the scalar type. The renderer runs in
// float; tests instantiate double to check against independent oracles at
// tight tolerances.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace splatsim {

template <typename T> using Vec2 = Eigen::Matrix<T, 2, 1>;
template <typename T> using Vec3 = Eigen::Matrix<T, 3, 1>;
template <typename T> using Vec4 = Eigen::Matrix<T, 4, 1>;
template <typename T> using Mat2 = Eigen::Matrix<T, 2, 2>;
template <typename T> using Mat3 = Eigen::Matrix<T, 3, 3>;
template <typename T> using Mat4 = Eigen::Matrix<T, 4, 4>;
template <typename T> using Mat23 = Eigen::Matrix<T, 2, 3>;

using Vec2f = Vec2<float>;
using Vec3f = Vec3<float>;
using Vec4f = Vec4<float>;
using Mat3f = Mat3<float>;
using Mat4f = Mat4<float>;

/// Diagonal floor added to every projected 2D covariance, in px².
inline constexpr double kCovarianceBlur = 0.3;
inline constexpr double kAlphaMax = 0.99;
/// Contributions below this alpha are skipped; Gaussians whose temporal
/// weight falls below it are culled before projection.
inline constexpr double kAlphaMin = 1.0 / 255.0;
inline constexpr double kDefaultTermEps = 1e-4;
/// Largest SH degree supported by eval_sh.
inline constexpr int kMaxShDegree = 3;

/// Number of RGB coefficient triples for a given SH degree.
constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// One scene primitive. `cov(3,3) == +inf` (with zero space-time cross
/// terms) marks a static Gaussian: no temporal decay, w_t == 1.
template <typename T>
struct Gaussian4D {
  Vec4<T> mean = Vec4<T>::Zero();
  Mat4<T> cov = Mat4<T>::Identity();
  T opacity = T(1);
  std::vector<Vec3<T>> sh;
  std::uint32_t id = 0;

  bool is_static() const { return std::isinf(cov(3, 3)); }
};

/// Throws std::invalid_argument describing the first violated invariant.
template <typename T>
void validate_gaussian(const Gaussian4D<T>& g) {
  const T sym_tol = T(1e-6);
  if (!g.mean.allFinite()) throw std::invalid_argument("non-finite mean");
  if (!(g.opacity >= T(0) && g.opacity <= T(1)))
    throw std::invalid_argument("opacity outside [0,1]");
  const int n = static_cast<int>(g.sh.size());
  bool ok_count = false;
  for (int d = 0; d <= kMaxShDegree; ++d) ok_count |= (n == sh_coeff_count(d));
  if (!ok_count) throw std::invalid_argument("SH coefficient count is not (deg+1)^2");

  const int dim = g.is_static() ? 3 : 4;
  if (g.is_static()) {
    for (int i = 0; i < 3; ++i)
      if (g.cov(i, 3) != T(0) || g.cov(3, i) != T(0))
        throw std::invalid_argument("static Gaussian with space-time covariance");
  }
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      if (!std::isfinite(g.cov(i, j))) throw std::invalid_argument("non-finite covariance");
      if (std::abs(g.cov(i, j) - g.cov(j, i)) > sym_tol * std::max(T(1), std::abs(g.cov(i, j))))
        throw std::invalid_argument("covariance not symmetric");
    }
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> block = g.cov.topLeftCorner(dim, dim);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>> es(
      block, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success || !(es.eigenvalues().minCoeff() > T(0)))
    throw std::invalid_argument("covariance not positive definite");
}

/// exp(-(x-mu)ᵀ·cov_inv·(x-mu)/2) for any dimension.
template <typename Derived, typename DerivedMu, typename DerivedInv>
typename Derived::Scalar gaussian_kernel(const Eigen::MatrixBase<Derived>& x,
                                         const Eigen::MatrixBase<DerivedMu>& mu,
                                         const Eigen::MatrixBase<DerivedInv>& cov_inv) {
  const auto d = (x - mu).eval();
  return std::exp(-d.dot(cov_inv * d) / 2);
}

/// U·diag(S²)·Uᵀ. Rejects a non-orthonormal U or a non-positive scale.
template <typename T>
Mat4<T> build_cov4(const Mat4<T>& rotation, const Vec4<T>& scales) {
  const T tol = T(1e-6);
  if (((rotation.transpose() * rotation) - Mat4<T>::Identity()).cwiseAbs().maxCoeff() > tol)
    throw std::invalid_argument("build_cov4: rotation is not orthonormal");
  if (!(scales.minCoeff() > T(0)))
    throw std::invalid_argument("build_cov4: scales must be positive");
  const Vec4<T> s2 = scales.cwiseProduct(scales);
  Mat4<T> cov = rotation * s2.asDiagonal() * rotation.transpose();
  return (cov + cov.transpose()) / T(2);
}

/// 4D rotation from a left-isoclinic and a right-isoclinic unit quaternion,
/// each given as (w, x, y, z). Quaternions are normalized here.
template <typename T>
Mat4<T> rotor_rotation(Vec4<T> left, Vec4<T> right) {
  const T nl = left.norm();
  const T nr = right.norm();
  if (!(nl > T(0)) || !(nr > T(0))) throw std::invalid_argument("rotor: zero quaternion");
  left /= nl;
  right /= nr;
  const T a = left(0), b = left(1), c = left(2), d = left(3);
  const T p = right(0), q = right(1), r = right(2), s = right(3);
  Mat4<T> l;
  l << a, -b, -c, -d,
       b,  a, -d,  c,
       c,  d,  a, -b,
       d, -c,  b,  a;
  Mat4<T> rr;
  rr << p, -q, -r, -s,
        q,  p,  s, -r,
        r, -s,  p,  q,
        s,  r, -q,  p;
  return l * rr;
}

/// A 4D Gaussian conditioned on time t.
template <typename T>
struct Sliced3D {
  Vec3<T> mean = Vec3<T>::Zero();
  Mat3<T> cov = Mat3<T>::Identity();
  /// G(t; mu_t, 1/lambda) in (0, 1].
  T temporal_weight = T(1);
  /// lambda·(t - mu_t)², so temporal_weight == exp(-temporal_q / 2).
  T temporal_q = T(0);
};

/// Temporal slicing with lambda = 1 / cov(3,3): the marginal over t times
/// the conditional over (x, y, z).
template <typename T>
Sliced3D<T> slice_at_time(const Gaussian4D<T>& g, T t) {
  Sliced3D<T> out;
  if (g.is_static()) {
    out.mean = g.mean.template head<3>();
    out.cov = g.cov.template topLeftCorner<3, 3>();
    return out;
  }
  const T s44 = g.cov(3, 3);
  if (!(s44 > T(0))) throw std::logic_error("slice_at_time: non-positive temporal variance");
  const T lambda = T(1) / s44;
  const T dt = t - g.mean(3);
  const Vec3<T> cross = g.cov.template block<3, 1>(0, 3);
  out.mean = g.mean.template head<3>() + cross * (lambda * dt);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j <= i; ++j) {
      const T v = g.cov(i, j) - cross(i) * lambda * cross(j);
      out.cov(i, j) = v;
      out.cov(j, i) = v;
    }
  out.temporal_q = lambda * dt * dt;
  out.temporal_weight = std::exp(-out.temporal_q / 2);
  return out;
}

/// Pinhole camera. `rotation`/`translation` map world to camera space
/// (x right, y down, z forward).
template <typename T>
struct Camera {
  Mat3<T> rotation = Mat3<T>::Identity();
  Vec3<T> translation = Vec3<T>::Zero();
  T fx = T(1), fy = T(1), cx = T(0), cy = T(0);
  int width = 1, height = 1;
  T znear = T(0.01), zfar = T(1000);

  Vec3<T> to_camera(const Vec3<T>& p) const { return rotation * p + translation; }
  Vec3<T> position() const { return -(rotation.transpose() * translation); }
};

template <typename T>
void validate_camera(const Camera<T>& cam) {
  const double err =
      static_cast<double>(((cam.rotation * cam.rotation.transpose()) - Mat3<T>::Identity())
                              .cwiseAbs()
                              .maxCoeff());
  if (err > 1e-5) throw std::invalid_argument("camera rotation not orthonormal");
  if (!(cam.fx > T(0) && cam.fy > T(0))) throw std::invalid_argument("camera focal length <= 0");
  if (!(cam.znear > T(0) && cam.znear < cam.zfar))
    throw std::invalid_argument("camera requires 0 < near < far");
  if (cam.width <= 0 || cam.height <= 0) throw std::invalid_argument("camera size <= 0");
}

template <typename T>
struct ProjectionContext {
  Mat23<T> jacobian = Mat23<T>::Zero();
  Vec3<T> cam_mean = Vec3<T>::Zero();
  T depth = T(0);
};

template <typename T>
struct SplatGeometry {
  Vec2<T> mean = Vec2<T>::Zero();
  Mat2<T> cov = Mat2<T>::Identity();
  T depth = T(0);
  T radius = T(0);
};

template <typename T>
struct Projection {
  ProjectionContext<T> context;
  SplatGeometry<T> geometry;
};

/// 3·sqrt(largest eigenvalue) of a 2×2 covariance, closed form.
template <typename T>
T splat_extent(const Mat2<T>& cov) {
  const T mid = (cov(0, 0) + cov(1, 1)) / 2;
  const T half_diff = (cov(0, 0) - cov(1, 1)) / 2;
  const T off = (cov(0, 1) + cov(1, 0)) / 2;
  const T lambda_max = mid + std::sqrt(half_diff * half_diff + off * off);
  return T(3) * std::sqrt(std::max(lambda_max, T(0)));
}

/// Projects a sliced Gaussian. Returns nullopt when the mean lies in front
/// of the near plane (the caller counts it as culled).
template <typename T>
std::optional<Projection<T>> project(const Sliced3D<T>& s, const Camera<T>& cam,
                                     T blur = T(kCovarianceBlur)) {
  Projection<T> p;
  const Vec3<T> c = cam.to_camera(s.mean);
  const T z = c(2);
  if (!(z >= cam.znear)) return std::nullopt;
  const T inv_z = T(1) / z;
  p.context.cam_mean = c;
  p.context.depth = z;
  auto& j = p.context.jacobian;
  // The Jacobian is taken at the mean with its view ray clamped to 1.3x the
  // half field of view.
  const T lim_x = T(1.3) * T(0.5) * static_cast<T>(cam.width) / cam.fx;
  const T lim_y = T(1.3) * T(0.5) * static_cast<T>(cam.height) / cam.fy;
  const T jx = std::clamp(c(0) * inv_z, -lim_x, lim_x);
  const T jy = std::clamp(c(1) * inv_z, -lim_y, lim_y);
  j << cam.fx * inv_z, T(0), -cam.fx * jx * inv_z,
       T(0), cam.fy * inv_z, -cam.fy * jy * inv_z;
  const Mat23<T> jw = j * cam.rotation;
  Mat2<T> cov2 = jw * s.cov * jw.transpose();
  cov2(0, 1) = cov2(1, 0) = (cov2(0, 1) + cov2(1, 0)) / 2;
  cov2(0, 0) += blur;
  cov2(1, 1) += blur;
  p.geometry.mean = Vec2<T>(cam.fx * c(0) * inv_z + cam.cx, cam.fy * c(1) * inv_z + cam.cy);
  p.geometry.cov = cov2;
  p.geometry.depth = z;
  p.geometry.radius = splat_extent(cov2);
  return p;
}

namespace sh_detail {
inline constexpr double kC0 = 0.28209479177387814;
inline constexpr double kC1 = 0.4886025119029199;
inline constexpr std::array<double, 5> kC2 = {1.0925484305920792, -1.0925484305920792,
                                              0.31539156525252005, -1.0925484305920792,
                                              0.5462742152960396};
inline constexpr std::array<double, 7> kC3 = {-0.5900435899266435, 2.890611442640554,
                                              -0.4570457994644658, 0.3731763325901154,
                                              -0.4570457994644658, 1.445305721320277,
                                              -0.5900435899266435};
}  // namespace sh_detail

/// View-dependent RGB from real SH coefficients (degree inferred from the
/// coefficient count), offset by +0.5 and clamped at zero.
template <typename T>
Vec3<T> eval_sh(std::span<const Vec3<T>> coeffs, const Vec3<T>& dir) {
  using namespace sh_detail;
  int degree = -1;
  for (int d = 0; d <= kMaxShDegree; ++d)
    if (static_cast<int>(coeffs.size()) == sh_coeff_count(d)) degree = d;
  if (degree < 0) throw std::invalid_argument("eval_sh: unsupported SH degree");

  Vec3<T> rgb = T(kC0) * coeffs[0];
  if (degree > 0) {
    const T x = dir(0), y = dir(1), z = dir(2);
    rgb += -T(kC1) * y * coeffs[1] + T(kC1) * z * coeffs[2] - T(kC1) * x * coeffs[3];
    if (degree > 1) {
      const T xx = x * x, yy = y * y, zz = z * z;
      const T xy = x * y, yz = y * z, xz = x * z;
      rgb += T(kC2[0]) * xy * coeffs[4] + T(kC2[1]) * yz * coeffs[5] +
             T(kC2[2]) * (T(2) * zz - xx - yy) * coeffs[6] + T(kC2[3]) * xz * coeffs[7] +
             T(kC2[4]) * (xx - yy) * coeffs[8];
      if (degree > 2) {
        rgb += T(kC3[0]) * y * (T(3) * xx - yy) * coeffs[9] +
               T(kC3[1]) * xy * z * coeffs[10] +
               T(kC3[2]) * y * (T(4) * zz - xx - yy) * coeffs[11] +
               T(kC3[3]) * z * (T(2) * zz - T(3) * xx - T(3) * yy) * coeffs[12] +
               T(kC3[4]) * x * (T(4) * zz - xx - yy) * coeffs[13] +
               T(kC3[5]) * z * (xx - yy) * coeffs[14] +
               T(kC3[6]) * x * (xx - T(3) * yy) * coeffs[15];
      }
    }
  }
  rgb.array() += T(0.5);
  return rgb.cwiseMax(T(0));
}

/// A projected, shaded Gaussian ready for rasterization.
template <typename T>
struct Splat2D {
  Vec2<T> mean = Vec2<T>::Zero();
  Mat2<T> cov = Mat2<T>::Identity();
  /// Upper triangle (a, b, c) of cov⁻¹.
  Vec3<T> conic = Vec3<T>(1, 0, 1);
  T depth = T(0);
  T radius = T(0);
  Vec3<T> color = Vec3<T>::Zero();
  T opacity = T(1);
  T temporal_q = T(0);
  /// opacity · w_t.
  T alpha_base = T(1);
  std::uint32_t id = 0;
};

/// Builds the conic of a splat; returns false for a singular covariance.
template <typename T>
bool set_conic(Splat2D<T>& s) {
  const T det = s.cov(0, 0) * s.cov(1, 1) - s.cov(0, 1) * s.cov(1, 0);
  if (!(det > T(0))) return false;
  const T inv = T(1) / det;
  s.conic = Vec3<T>(s.cov(1, 1) * inv, -s.cov(0, 1) * inv, s.cov(0, 0) * inv);
  return true;
}

/// (pixel - mean)ᵀ·cov⁻¹·(pixel - mean).
template <typename T>
T splat_mahalanobis2(const Splat2D<T>& s, const Vec2<T>& pixel) {
  const T dx = pixel(0) - s.mean(0);
  const T dy = pixel(1) - s.mean(1);
  return s.conic(0) * dx * dx + T(2) * s.conic(1) * dx * dy + s.conic(2) * dy * dy;
}

/// Merged-exponent alpha: the temporal and spatial factors share one exp.
template <typename T>
T eval_alpha(const Splat2D<T>& s, const Vec2<T>& pixel) {
  const T q = splat_mahalanobis2(s, pixel);
  return std::min(T(kAlphaMax), s.opacity * std::exp(-(q + s.temporal_q) / 2));
}

/// Reference form with separate spatial and temporal exponentials.
template <typename T>
T eval_alpha_two_exp(const Splat2D<T>& s, const Vec2<T>& pixel) {
  const T q = splat_mahalanobis2(s, pixel);
  return std::min(T(kAlphaMax), s.alpha_base * std::exp(-q / 2));
}

/// Front-to-back accumulator shared by blend_pixel and the renderer.
template <typename T>
struct Compositor {
  Vec3<T> rgb = Vec3<T>::Zero();
  T transmittance = T(1);
  T term_eps = T(kDefaultTermEps);

  bool saturated() const { return transmittance < term_eps; }
  void add(T alpha, const Vec3<T>& color) {
    rgb += color * (alpha * transmittance);
    transmittance *= (T(1) - alpha);
  }
};

template <typename T>
struct AlphaColor {
  T alpha = T(0);
  Vec3<T> color = Vec3<T>::Zero();
};

template <typename T>
struct BlendResult {
  Vec3<T> rgb = Vec3<T>::Zero();
  T transmittance = T(1);
};

/// Front-to-back compositing of a depth-sorted list; stops once the
/// transmittance drops below term_eps.
template <typename T>
BlendResult<T> blend_pixel(std::span<const AlphaColor<T>> sorted, T term_eps) {
  Compositor<T> acc;
  acc.term_eps = term_eps;
  for (const auto& e : sorted) {
    if (acc.saturated()) break;
    acc.add(e.alpha, e.color);
  }
  return {acc.rgb, acc.transmittance};
}

/// Axis half-widths of the sigma-box enclosing a Gaussian's marginal
/// support in space and in time.
template <typename T>
struct Extent4 {
  Vec3<T> spatial = Vec3<T>::Zero();
  T temporal = T(0);
};

template <typename T>
Extent4<T> extent4(const Gaussian4D<T>& g, T sigma = T(3)) {
  Extent4<T> e;
  for (int i = 0; i < 3; ++i) e.spatial(i) = sigma * std::sqrt(g.cov(i, i));
  e.temporal = g.is_static() ? std::numeric_limits<T>::infinity()
                             : sigma * std::sqrt(g.cov(3, 3));
  return e;
}

}  // namespace splatsim
