#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "lieflow/errors.hpp"

namespace lieflow {

/// Axis-aligned scene bounds. Queries outside the box are clamped by the
/// samplers, not rejected; only an unusable box itself is an error.
struct Aabb {
  Eigen::Vector3d min = Eigen::Vector3d::Constant(-1.0);
  Eigen::Vector3d max = Eigen::Vector3d::Constant(1.0);

  bool valid() const {
    return min.allFinite() && max.allFinite() && (max.array() > min.array()).all();
  }

  void require_valid() const {
    if (!valid()) throw PointOutsideAabb("aabb: bounds are not finite and ordered");
  }

  Eigen::Vector3d extent() const { return max - min; }

  /// Maps the box to [0,1]^3 (no clamping).
  Eigen::Vector3d to_unit(const Eigen::Vector3d& p) const {
    return (p - min).cwiseQuotient(extent());
  }

  /// Maps the box to [-1,1]^3 (no clamping).
  Eigen::Vector3d to_symmetric(const Eigen::Vector3d& p) const {
    return 2.0 * to_unit(p) - Eigen::Vector3d::Ones();
  }

  bool contains(const Eigen::Vector3d& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }

  /// Box shrunk by `margin` on every side.
  Aabb shrunk(double margin) const {
    Aabb s;
    s.min = min + Eigen::Vector3d::Constant(margin);
    s.max = max - Eigen::Vector3d::Constant(margin);
    return s;
  }
};

}  // namespace lieflow
