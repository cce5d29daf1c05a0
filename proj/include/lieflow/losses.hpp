#pragma once

#include <Eigen/Dense>
#include <span>

#include "lieflow/aabb.hpp"
#include "lieflow/image.hpp"
#include "lieflow/liegroup.hpp"
#include "lieflow/rng.hpp"
#include "lieflow/se3field.hpp"
#include "lieflow/tape.hpp"

namespace lieflow {

/// Sample sites for the field regularizers: points uniform in the box
/// shrunk by the spatial step, times uniform in [h_t, 1 - h_t], so the
/// central differences never leave the domain.
struct RegularizerBatch {
  Eigen::MatrixXd points;  // N x 3
  Eigen::VectorXd times;   // M
  double h_space = 1e-4;
  double h_time = 1e-4;

  static RegularizerBatch sample(const Aabb& aabb, int n_points, int n_times, double h_space,
                                 double h_time, Rng& rng);
};

/// Instantaneous velocity a point at p experiences under the local twist:
/// u(p, t) = omega(p, t) x p + v(p, t).
Eigen::Vector3d induced_velocity(const TwistField& field, const Eigen::Vector3d& p, double t);

/// Which field the incompressibility penalty constrains: the induced
/// velocity u = omega x p + v (default), or the raw translational branch v.
enum class DivergenceTarget { kInducedVelocity, kVOnly };

/// Mean |div u| over the batch, divergence by central differences (h_space).
double divergence_loss(const TwistField& field, const RegularizerBatch& batch,
                       DivergenceTarget target = DivergenceTarget::kInducedVelocity);

/// Mean |du/dt + (u . grad) u - accel| over the batch, derivatives by
/// central differences.
double momentum_loss(const TwistField& field, const RegularizerBatch& batch,
                     const Eigen::Vector3d& accel);

/// Mean Frobenius distance of R R^T from the identity plus the mean twist
/// translation magnitude. The rotation term reads ~0 for anything produced
/// by the closed-form exponential; it is kept as a structural diagnostic.
double se3_struct_loss(std::span<const RigidTransform> transforms,
                       std::span<const Twist> twists);

double ortho_penalty(std::span<const RigidTransform> transforms);

enum class PhotometricNorm { kMse, kL1 };

/// Mean squared (or absolute) error over pixels and channels. A mask image
/// restricts the mean to pixels whose first channel exceeds 0.5.
double photometric_loss(const Image& rendered, const Image& reference,
                        const Image* mask = nullptr,
                        PhotometricNorm norm = PhotometricNorm::kMse);

// Differentiable versions, built on the tape against an Se3Field.

ad::Var divergence_loss_tape(ad::Tape& tape, const Se3Field& field,
                             const RegularizerBatch& batch,
                             DivergenceTarget target = DivergenceTarget::kInducedVelocity);

/// `accel_param` names a 1x3 entry that is learned jointly with the field.
ad::Var momentum_loss_tape(ad::Tape& tape, const Se3Field& field, const RegularizerBatch& batch,
                           const std::string& accel_param);

/// Mean L2 row norm of a Bx3 twist translation block.
ad::Var translation_magnitude_tape(ad::Tape& tape, ad::Var v_rows);

}  // namespace lieflow
