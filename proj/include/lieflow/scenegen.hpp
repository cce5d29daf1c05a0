#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "lieflow/aabb.hpp"
#include "lieflow/hexplane.hpp"
#include "lieflow/liegroup.hpp"
#include "lieflow/render.hpp"
#include "lieflow/rng.hpp"

namespace lieflow {

/// Piecewise-constant twist: segment j is active on [t_start_j, t_start_{j+1}).
struct MotionSegment {
  double t_start = 0.0;
  Twist xi;
};

struct Primitive {
  enum class Kind { kSphere, kBox };
  Kind kind = Kind::kSphere;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 0.5;                                      // sphere
  Eigen::Vector3d half_extents = Eigen::Vector3d::Zero();   // box
  double density = 20.0;
  Eigen::Vector3d rgb{1, 1, 1};
  std::vector<MotionSegment> motion;  // empty means static

  /// World pose of the primitive at normalized time t (identity at t = 0).
  RigidTransform pose(double t) const;

  /// Containment test in the t = 0 body frame.
  bool contains_local(const Eigen::Vector3d& p) const;
};

/// Declarative synthetic scene: primitives with analytic rigid motion, a
/// camera ring, frame layout and split assignment.
struct SceneSpec {
  Aabb aabb;
  std::vector<Primitive> primitives;
  std::vector<CameraModel> cameras;
  std::vector<int> train_cameras;
  std::vector<int> holdout_cameras;
  int frame_count = 30;
  int train_frame_count = 25;  // frames >= this index are extrapolation
  Eigen::Vector3d background{0, 0, 0};
  int samples_per_ray = 96;
  int track_points = 50;
  std::uint64_t seed = 1;

  std::vector<double> timestamps() const;

  /// Parses the scene description (see README for the schema) and generates
  /// the camera ring. Throws ParseError with a line number on bad input.
  static SceneSpec from_json_text(const std::string& text);
  static SceneSpec from_json_file(const std::string& path);

  /// Checks that every primitive stays inside the box over t in [0,1]
  /// (sampled densely). Throws DatasetInvalid otherwise.
  void validate() const;
};

/// Ground-truth density/color at a spacetime point: each primitive is carried
/// by its pose, the first containing primitive wins, empty space elsewhere.
FieldSample analytic_field(const SceneSpec& spec, const Eigen::Vector3d& p, double t);

/// Batched adapter for the renderer.
BatchFieldFn analytic_field_fn(const SceneSpec& spec);

/// Surface points of one primitive carried through every frame, with the
/// ground-truth per-frame poses. positions[f] is row k = point k at frame f.
struct TrackSet {
  int primitive = 0;
  Eigen::MatrixXd base_points;             // K x 3 at t = 0
  std::vector<Eigen::MatrixXd> positions;  // frame -> K x 3
  std::vector<RigidTransform> poses;       // frame -> world pose
  std::vector<double> timestamps;
};

TrackSet make_tracks(const SceneSpec& spec, int primitive_index, int k_points, Rng& rng);

/// Renders every (camera, frame) to PNG and writes poses.json, manifest.json
/// and tracks.json under out_dir. Deterministic for a fixed spec.
void render_dataset(const SceneSpec& spec, const std::string& out_dir);

/// Least-squares rigid alignment (Kabsch) of p0s onto pts, returned as the
/// twist whose exponential over dt performs the motion. Throws
/// DegenerateConfiguration for fewer than three or collinear points.
Twist fit_twist(const Eigen::MatrixXd& p0s, const Eigen::MatrixXd& pts, double dt);

}  // namespace lieflow
