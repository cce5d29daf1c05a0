#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <span>

#include "lieflow/errors.hpp"

// Closed-form SO(3)/SE(3) group and algebra operations.
//
// Conventions:
//   * A twist xi = (omega, v) lives in the algebra; omega is angular velocity
//     (rad per unit time), v linear velocity (scene units per unit time).
//   * The matrix embedding of a twist is [[hat(omega), v], [0, 0]].
//   * Rotations act on column vectors: p' = R p + t.
//   * Small-angle branches switch to second-order Taylor expansions of the
//     Rodrigues coefficients at theta < 1e-6.

namespace lieflow {

template <typename S>
using Vec3T = Eigen::Matrix<S, 3, 1>;
template <typename S>
using Mat3T = Eigen::Matrix<S, 3, 3>;
template <typename S>
using Mat4T = Eigen::Matrix<S, 4, 4>;

template <typename S>
struct TwistT {
  Vec3T<S> omega = Vec3T<S>::Zero();
  Vec3T<S> v = Vec3T<S>::Zero();
};

template <typename S>
struct RigidTransformT {
  Mat3T<S> R = Mat3T<S>::Identity();
  Vec3T<S> t = Vec3T<S>::Zero();

  Mat4T<S> matrix() const {
    Mat4T<S> m = Mat4T<S>::Identity();
    m.template block<3, 3>(0, 0) = R;
    m.template block<3, 1>(0, 3) = t;
    return m;
  }
};

using Twist = TwistT<double>;
using RigidTransform = RigidTransformT<double>;

inline constexpr double kSmallAngle = 1e-6;

template <typename S>
Mat3T<S> hat(const Vec3T<S>& w) {
  Mat3T<S> m;
  m << S(0), -w.z(), w.y(),  //
      w.z(), S(0), -w.x(),   //
      -w.y(), w.x(), S(0);
  return m;
}

template <typename S>
Vec3T<S> vee(const Mat3T<S>& m) {
  return Vec3T<S>(m(2, 1), m(0, 2), m(1, 0));
}

/// Rodrigues coefficients a = sin(t)/t, b = (1-cos(t))/t^2, c = (t-sin(t))/t^3
/// as functions of the angle. Taylor branch below kSmallAngle.
template <typename S>
void rotation_coeffs(S theta, S& a, S& b, S& c) {
  if (theta < S(kSmallAngle)) {
    const S t2 = theta * theta;
    a = S(1) - t2 / S(6);
    b = S(0.5) - t2 / S(24);
    c = S(1) / S(6) - t2 / S(120);
  } else {
    const S t2 = theta * theta;
    a = std::sin(theta) / theta;
    b = (S(1) - std::cos(theta)) / t2;
    c = (theta - std::sin(theta)) / (t2 * theta);
  }
}

template <typename S>
Mat3T<S> exp_so3(const Vec3T<S>& omega) {
  const S theta = omega.norm();
  S a, b, c;
  rotation_coeffs(theta, a, b, c);
  const Mat3T<S> w = hat(omega);
  return Mat3T<S>::Identity() + a * w + b * (w * w);
}

template <typename S>
bool is_rotation(const Mat3T<S>& R, S tol) {
  const S drift = (R * R.transpose() - Mat3T<S>::Identity()).norm();
  return drift <= tol && R.determinant() > S(0);
}

struct So3LogInfo {
  bool near_pi = false;
};

/// Inverse of exp_so3. Requires R orthonormal within 1e-6. The returned
/// vector has norm in [0, pi]; at a half turn the axis sign is fixed so the
/// first nonzero component is positive.
template <typename S>
Vec3T<S> log_so3(const Mat3T<S>& R, So3LogInfo* info = nullptr) {
  if (!is_rotation(R, S(1e-6))) {
    throw NotARotation("log_so3: input fails orthonormality check");
  }
  const S tr = R.trace();
  const Vec3T<S> skew = vee<S>((R - R.transpose()).eval());
  const S sin_theta = skew.norm() / S(2);
  const S cos_theta = std::clamp((tr - S(1)) / S(2), S(-1), S(1));
  // atan2 keeps full precision where acos of the trace alone would not
  const S theta = std::atan2(sin_theta, cos_theta);

  if (tr <= S(-1) + S(1e-6)) {
    // Half-turn neighborhood: R + I has rank one, every nonzero column is
    // parallel to the axis.
    if (info) info->near_pi = true;
    const Mat3T<S> B = R + Mat3T<S>::Identity();
    int best = 0;
    B.colwise().norm().maxCoeff(&best);
    Vec3T<S> axis = B.col(best).normalized();
    for (int i = 0; i < 3; ++i) {
      if (std::abs(axis[i]) > S(1e-9)) {
        if (axis[i] < S(0)) axis = -axis;
        break;
      }
    }
    return theta * axis;
  }
  if (info) info->near_pi = false;

  S factor;
  if (theta < S(kSmallAngle)) {
    factor = S(0.5) + theta * theta / S(12);
  } else {
    factor = theta / (S(2) * sin_theta);
  }
  return factor * skew;
}

/// Left Jacobian V of SO(3): exp_se3 translation satisfies t = V(omega) v.
template <typename S>
Mat3T<S> so3_left_jacobian(const Vec3T<S>& omega) {
  const S theta = omega.norm();
  S a, b, c;
  rotation_coeffs(theta, a, b, c);
  const Mat3T<S> w = hat(omega);
  return Mat3T<S>::Identity() + b * w + c * (w * w);
}

template <typename S>
Mat3T<S> so3_left_jacobian_inverse(const Vec3T<S>& omega) {
  const S theta = omega.norm();
  const Mat3T<S> w = hat(omega);
  S d;  // coefficient of w^2 in V^-1 = I - w/2 + d w^2
  if (theta < S(1e-2)) {
    const S t2 = theta * theta;
    d = S(1) / S(12) + t2 / S(720) + t2 * t2 / S(30240);
  } else {
    const S half = theta / S(2);
    d = (S(1) - half * std::cos(half) / std::sin(half)) / (theta * theta);
  }
  return Mat3T<S>::Identity() - S(0.5) * w + d * (w * w);
}

template <typename S>
RigidTransformT<S> exp_se3(const TwistT<S>& xi) {
  RigidTransformT<S> g;
  g.R = exp_so3(xi.omega);
  g.t = so3_left_jacobian(xi.omega) * xi.v;
  return g;
}

template <typename S>
TwistT<S> log_se3(const RigidTransformT<S>& g) {
  TwistT<S> xi;
  xi.omega = log_so3(g.R);
  xi.v = so3_left_jacobian_inverse(xi.omega) * g.t;
  return xi;
}

/// Nearest rotation in Frobenius norm (polar projection).
template <typename S>
Mat3T<S> project_rotation(const Mat3T<S>& m) {
  Eigen::JacobiSVD<Mat3T<S>> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3T<S> R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < S(0)) {
    Mat3T<S> flip = Mat3T<S>::Identity();
    flip(2, 2) = S(-1);
    R = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return R;
}

template <typename S>
RigidTransformT<S> compose(const RigidTransformT<S>& a, const RigidTransformT<S>& b) {
  RigidTransformT<S> g;
  g.R = a.R * b.R;
  g.t = a.R * b.t + a.t;
  const S drift = (g.R * g.R.transpose() - Mat3T<S>::Identity()).norm();
  if (drift > S(1e-12)) {
    g.R = project_rotation(g.R);
  }
  return g;
}

template <typename S>
RigidTransformT<S> inverse(const RigidTransformT<S>& g) {
  RigidTransformT<S> inv;
  inv.R = g.R.transpose();
  inv.t = -(inv.R * g.t);
  return inv;
}

template <typename S>
Vec3T<S> apply_point(const RigidTransformT<S>& g, const Vec3T<S>& p) {
  return g.R * p + g.t;
}

template <typename S>
TwistT<S> scale_twist(S s, const TwistT<S>& xi) {
  return TwistT<S>{(s * xi.omega).eval(), (s * xi.v).eval()};
}

template <typename S>
Mat3T<S> rot_z(S theta) {
  Mat3T<S> R;
  const S c = std::cos(theta), s = std::sin(theta);
  R << c, -s, S(0),  //
      s, c, S(0),    //
      S(0), S(0), S(1);
  return R;
}

/// Minimum over a shared translation t' of sum_i |Rz(theta) p_i + t - (p_i + t')|^2.
/// The shared translation absorbs the centroid, leaving the pure rotation
/// residual sum_i |(Rz(theta) - I)(p_i - mean)|^2.
inline double translation_residual(std::span<const Eigen::Vector3d> points, double theta) {
  if (points.empty()) {
    throw EmptyInput("translation_residual: no points");
  }
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());

  const Eigen::Matrix3d A = rot_z(theta) - Eigen::Matrix3d::Identity();
  double residual = 0.0;
  for (const auto& p : points) {
    residual += (A * (p - mean)).squaredNorm();
  }
  return residual;
}

}  // namespace lieflow
