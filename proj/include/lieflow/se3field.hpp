#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "lieflow/aabb.hpp"
#include "lieflow/liegroup.hpp"
#include "lieflow/mlp.hpp"
#include "lieflow/param_store.hpp"
#include "lieflow/rng.hpp"
#include "lieflow/tape.hpp"

namespace lieflow {

/// Sinusoidal spacetime encoding: [p, t, sin(2^k pi p), cos(2^k pi p) for
/// k < lp, sin(2^k pi t), cos(2^k pi t) for k < lt]. Raw inputs included.
/// p is expected in [-1,1]^3, t in [0,1].
Eigen::VectorXd posenc(const Eigen::Vector3d& p, double t, int lp, int lt);
Eigen::MatrixXd posenc_batch(const Eigen::MatrixXd& pts, double t, int lp, int lt);
constexpr int posenc_width(int lp, int lt) { return 4 + 6 * lp + 2 * lt; }

/// Which reference frame a query warps to. References are every stride-th
/// frame of the covered range; ties in the timestamp distance break toward
/// the earlier reference.
struct ReferenceSchedule {
  int frame_count = 0;
  int stride = 4;
  std::vector<double> frame_times;  // one per covered frame
  std::vector<int> ref_frames;
  std::vector<double> ref_times;

  static ReferenceSchedule make(std::vector<double> frame_times, int stride);
  bool is_reference_time(double t, double tol = 1e-12) const;
};

/// Timestamp of the nearest reference to t_i.
double nearest_ref(double t_i, const ReferenceSchedule& schedule);

enum class Ablation { kFull, kTranslationOnly, kRotationOnly };
enum class Integrator { kExpOfIntegral, kProductOfExp };

struct Se3FieldConfig {
  int lp = 6;
  int lt = 4;
  int hidden = 128;
  int layers = 4;  // total linear layers per branch
  Aabb aabb;
  Ablation ablation = Ablation::kFull;
  Integrator integrator = Integrator::kExpOfIntegral;
};

/// Twist field over spacetime: two MLP branches on a shared encoding, one
/// for angular velocity, one for linear velocity. Final layers start at
/// zero so the field begins as the identity transform everywhere.
/// The twist along an integration interval is always evaluated at the fixed
/// starting point of the sample being warped.
class Se3Field {
 public:
  Se3Field(const Se3FieldConfig& cfg, ParamStore& store, Rng& rng);
  Se3Field(const Se3FieldConfig& cfg, const ParamStore& store);

  const Se3FieldConfig& config() const { return cfg_; }

  Twist twist(const ParamStore& store, const Eigen::Vector3d& p, double t) const;
  void twist_batch(const ParamStore& store, const Eigen::MatrixXd& pts, double t,
                   Eigen::MatrixXd& omega_out, Eigen::MatrixXd& v_out) const;

  /// Transform carrying a point from its pose at t_i to the pose at t_k.
  /// kExpOfIntegral: exp of the trapezoidal time integral of the twist.
  /// kProductOfExp: chronological product of per-step midpoint exponentials.
  RigidTransform integrate(const ParamStore& store, const Eigen::Vector3d& p, double t_i,
                           double t_k, int steps) const;

  std::pair<Eigen::Vector3d, double> warp_to_canonical(const ParamStore& store,
                                                       const ReferenceSchedule& schedule,
                                                       const Eigen::Vector3d& p, double t_i,
                                                       int steps) const;

  void warp_batch(const ParamStore& store, const Eigen::MatrixXd& pts, double t_i, double t_k,
                  int steps, Eigen::MatrixXd& warped_out) const;

  struct TapeTwist {
    ad::Var omega;  // Bx3
    ad::Var v;      // Bx3
  };
  TapeTwist twist_tape(ad::Tape& tape, const Eigen::MatrixXd& pts, double t) const;

  struct TapeWarp {
    ad::Var x, y, z;      // warped coordinates, Bx1 each
    TapeTwist integrated;  // the integrated twist (exp-of-integral mode) or
                           // the final step twist (product mode)
  };
  TapeWarp warp_tape(ad::Tape& tape, const Eigen::MatrixXd& pts, double t_i, double t_k,
                     int steps) const;

 private:
  Eigen::MatrixXd encode_points(const Eigen::MatrixXd& pts, double t) const;
  TapeTwist apply_ablation(ad::Tape& tape, ad::Var omega, ad::Var v) const;

  Se3FieldConfig cfg_;
  Mlp omega_branch_;
  Mlp v_branch_;
};

/// Generic twist field used by quadrature oracles and the regularizers.
using TwistField = std::function<Twist(const Eigen::Vector3d&, double)>;

/// Same integration rules as Se3Field::integrate but over an arbitrary field.
RigidTransform integrate_twist_field(const TwistField& field, const Eigen::Vector3d& p,
                                     double t_i, double t_k, int steps, Integrator mode);

}  // namespace lieflow
