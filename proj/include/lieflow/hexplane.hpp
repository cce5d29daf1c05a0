#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>

#include "lieflow/aabb.hpp"
#include "lieflow/mlp.hpp"
#include "lieflow/param_store.hpp"
#include "lieflow/rng.hpp"
#include "lieflow/tape.hpp"

namespace lieflow {

/// Density and color at one spacetime query.
struct FieldSample {
  double sigma = 0.0;          // nonnegative, softplus-enforced
  Eigen::Vector3d rgb{0, 0, 0};  // in [0,1], sigmoid-enforced
};

struct HexPlaneConfig {
  int res = 64;        // plane resolution (shared by all six planes)
  int feat = 16;       // channels per plane
  int embed = 15;      // appearance embedding width
  int rgb_hidden = 64; // hidden width of the color head
  int view_freqs = 4;  // sinusoidal frequencies for the view direction
  double init_scale = 0.1;
  Aabb aabb;
};

/// Factorized spacetime radiance field: three spatial planes (xy, xz, yz)
/// and three spatiotemporal planes (zt, yt, xt). A query projects onto all
/// six, pairs each spatial plane with the plane covering its complementary
/// axes, multiplies the pair elementwise and concatenates the products.
/// Coordinates are clamped to the box, so rays may exit it freely.
class HexPlaneField {
 public:
  /// Registers all parameters in `store` under "hexplane.*".
  HexPlaneField(const HexPlaneConfig& cfg, ParamStore& store, Rng& rng);

  /// Binds to already-registered parameters.
  HexPlaneField(const HexPlaneConfig& cfg, const ParamStore& store);

  const HexPlaneConfig& config() const { return cfg_; }
  int fused_width() const { return 3 * cfg_.feat; }
  int view_enc_width() const { return 3 + 6 * cfg_.view_freqs; }

  Eigen::VectorXd encode(const ParamStore& store, const Eigen::Vector3d& p, double t) const;
  FieldSample query(const ParamStore& store, const Eigen::Vector3d& p, double t,
                    const Eigen::Vector3d& view_dir) const;

  /// Batched plain query: pts is Bx3 (world), dirs Bx3 (unit), one shared t.
  void query_batch(const ParamStore& store, const Eigen::MatrixXd& pts, double t,
                   const Eigen::MatrixXd& dirs, Eigen::VectorXd& sigma_out,
                   Eigen::MatrixXd& rgb_out) const;

  struct TapeSample {
    ad::Var sigma;  // Bx1
    ad::Var rgb;    // Bx3
  };

  /// Tape query with world coordinates as differentiable columns (Bx1 each).
  /// Directions are always treated as constants.
  TapeSample query_tape(ad::Tape& tape, ad::Var x, ad::Var y, ad::Var z, double t,
                        const Eigen::MatrixXd& dirs) const;

  /// Sinusoidal encoding of unit directions, raw components included.
  Eigen::MatrixXd encode_dirs(const Eigen::MatrixXd& dirs) const;

 private:
  HexPlaneConfig cfg_;
  Mlp rgb_head_;
};

/// Bilinear sample of an (res*res)xF plane at (u, v) in [0,1]^2 (clamped).
/// Texel (i, j) sits at (i, j)/(res-1) and is stored at row i*res + j.
Eigen::VectorXd bilerp(const Eigen::MatrixXd& plane, int res, double u, double v);

}  // namespace lieflow
