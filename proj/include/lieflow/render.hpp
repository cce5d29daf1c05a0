#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "lieflow/hexplane.hpp"
#include "lieflow/image.hpp"
#include "lieflow/liegroup.hpp"
#include "lieflow/rng.hpp"
#include "lieflow/se3field.hpp"

namespace lieflow {

/// Pinhole camera. Right-handed: x right, y up, looking down -z in camera
/// space; cam_to_world carries camera coordinates into the scene.
struct CameraModel {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  RigidTransform cam_to_world;
  double near_depth = 0, far_depth = 0;

  void require_valid() const;
};

struct Ray {
  Eigen::Vector3d origin;
  Eigen::Vector3d dir;  // unit length
};

/// Ray through the center of pixel (row, col); row 0 is the top of the image.
Ray pixel_ray(const CameraModel& cam, int row, int col);

std::vector<Ray> gen_rays(const CameraModel& cam,
                          std::span<const std::pair<int, int>> pixels);

/// n equal bins over [near, far]; centers when jitter is off, one uniform
/// draw per bin when on.
Eigen::VectorXd stratified_samples(double near, double far, int n, bool jitter, Rng* rng);

/// deltas[i] = depths[i+1] - depths[i], last delta closes the interval to far.
Eigen::VectorXd deltas_from_depths(const Eigen::VectorXd& depths, double far);

/// Emission-absorption compositing: alpha_i = 1 - exp(-sigma_i delta_i),
/// transmittance T_i multiplies alphas of everything in front, background
/// gets the leftover transmittance.
Eigen::Vector3d volume_render(const Eigen::VectorXd& sigmas, const Eigen::MatrixXd& colors,
                              const Eigen::VectorXd& deltas, const Eigen::Vector3d& background);

struct RenderConfig {
  int samples_per_ray = 64;
  int quad_steps = 4;
  Eigen::Vector3d background{0, 0, 0};
  bool jitter = false;   // kept off for deterministic evaluation renders
  std::uint64_t seed = 0;
};

/// Batched density/color query: pts and dirs are Bx3, outputs sized by the
/// callee. Must be safe to call concurrently.
using BatchFieldFn =
    std::function<void(const Eigen::MatrixXd& pts, double t, const Eigen::MatrixXd& dirs,
                       Eigen::VectorXd& sigma_out, Eigen::MatrixXd& rgb_out)>;

/// Full-frame render of an arbitrary field at time t. Pixels are distributed
/// over worker threads (capped by LIEFLOW_THREADS), each writing disjoint
/// rows, so the result is identical for any thread count.
Image render_image_field(const BatchFieldFn& field, const CameraModel& cam, double t,
                         const RenderConfig& cfg);

/// Full-frame render of the learned radiance field. When `warp` and
/// `schedule` are given and t_i is not a reference timestamp, every sample
/// point is carried to the nearest reference time before querying; colors
/// always use the original ray direction.
Image render_image(const ParamStore& store, const HexPlaneField& radiance,
                   const Se3Field* warp, const ReferenceSchedule* schedule,
                   const CameraModel& cam, double t_i, const RenderConfig& cfg);

/// Worker cap from LIEFLOW_THREADS (defaults to hardware concurrency).
int worker_count();

}  // namespace lieflow
