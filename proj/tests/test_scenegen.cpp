#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "lieflow/metrics.hpp"
#include "lieflow/scenegen.hpp"

using namespace lieflow;
namespace fs = std::filesystem;

namespace {

SceneSpec basic_scene() {
  SceneSpec spec;
  spec.aabb.min = Eigen::Vector3d(-1.5, -1.5, -1.5);
  spec.aabb.max = Eigen::Vector3d(1.5, 1.5, 1.5);
  spec.frame_count = 6;
  spec.train_frame_count = 6;
  spec.samples_per_ray = 64;
  spec.track_points = 40;

  Primitive sphere;
  sphere.kind = Primitive::Kind::kSphere;
  sphere.center = Eigen::Vector3d(0.5, 0.0, 0.0);
  sphere.radius = 0.25;
  sphere.density = 40.0;
  sphere.rgb = Eigen::Vector3d(0.9, 0.2, 0.2);
  sphere.motion.push_back({0.0, Twist{Eigen::Vector3d(0, 0, M_PI), Eigen::Vector3d::Zero()}});
  spec.primitives.push_back(sphere);

  CameraModel cam;
  cam.fx = cam.fy = 60.0;
  cam.cx = cam.cy = 16.0;
  cam.width = cam.height = 32;
  cam.near_depth = 1.5;
  cam.far_depth = 4.5;
  cam.cam_to_world.R << 1, 0, 0, 0, 0, -1, 0, 1, 0;  // looking along +y from y = -3
  cam.cam_to_world.t = Eigen::Vector3d(0, -3, 0);
  spec.cameras.push_back(cam);
  spec.train_cameras = {0};
  return spec;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("analytic field containment") {
  const SceneSpec spec = basic_scene();

  CHECK(analytic_field(spec, Eigen::Vector3d(0, 0, 1.3), 0.0).sigma == 0.0);
  const FieldSample hit = analytic_field(spec, Eigen::Vector3d(0.5, 0, 0), 0.0);
  CHECK(hit.sigma == 40.0);
  CHECK(hit.rgb == Eigen::Vector3d(0.9, 0.2, 0.2));

  // rotating sphere: containment at t equals containment of the
  // inverse-rotated point at t = 0
  Rng rng(3);
  const Primitive& prim = spec.primitives[0];
  for (int k = 0; k < 200; ++k) {
    const Eigen::Vector3d p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const double t = rng.uniform();
    const Eigen::Vector3d unrotated = apply_point(inverse(prim.pose(t)), p);
    const bool expect = (unrotated - prim.center).norm() <= prim.radius;
    CHECK((analytic_field(spec, p, t).sigma > 0.0) == expect);
  }
}

TEST_CASE("track positions match the raw rotation formula") {
  // pure rotation about z: p_t = Rz(theta t) p0 with Rz built from cos/sin
  SceneSpec spec = basic_scene();
  const double rate = M_PI;
  Rng rng(5);
  const TrackSet tracks = make_tracks(spec, 0, 25, rng);
  for (std::size_t f = 0; f < tracks.timestamps.size(); ++f) {
    const double theta = rate * tracks.timestamps[f];
    const double c = std::cos(theta), s = std::sin(theta);
    for (int k = 0; k < 25; ++k) {
      const Eigen::Vector3d p0 = tracks.base_points.row(k).transpose();
      const Eigen::Vector3d manual(c * p0.x() - s * p0.y(), s * p0.x() + c * p0.y(), p0.z());
      CHECK((tracks.positions[f].row(k).transpose() - manual).cwiseAbs().maxCoeff() < 1e-12);
      // exact consistency with the stored pose
      const Eigen::Vector3d via_pose = apply_point(tracks.poses[f], p0);
      CHECK(tracks.positions[f].row(k).transpose() == via_pose);
    }
  }

  // rotation plus drift still matches the generating pose exactly
  SceneSpec drifting = basic_scene();
  drifting.primitives[0].motion[0].xi.v = Eigen::Vector3d(0.4, -0.2, 0.1);
  Rng rng2(7);
  const TrackSet t2 = make_tracks(drifting, 0, 10, rng2);
  for (std::size_t f = 0; f < t2.timestamps.size(); ++f) {
    for (int k = 0; k < 10; ++k) {
      const Eigen::Vector3d p0 = t2.base_points.row(k).transpose();
      CHECK(t2.positions[f].row(k).transpose() == apply_point(t2.poses[f], p0));
    }
  }
}

TEST_CASE("fit_twist recovers rigid motion") {
  Rng rng(11);

  // identical clouds: zero twist
  Eigen::MatrixXd cloud(30, 3);
  for (Eigen::Index i = 0; i < cloud.size(); ++i) cloud(i) = rng.uniform(-1, 1);
  const Twist zero = fit_twist(cloud, cloud, 0.5);
  CHECK(zero.omega.norm() < 1e-12);
  CHECK(zero.v.norm() < 1e-12);

  // noiseless forward-generate-then-recover
  for (int trial = 0; trial < 50; ++trial) {
    Twist gt;
    gt.omega = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    gt.omega *= rng.uniform(0.0, (M_PI - 0.1) / gt.omega.norm() / 0.25);
    gt.v = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    const double dt = 0.25;
    const RigidTransform g = exp_se3(scale_twist(dt, gt));
    Eigen::MatrixXd moved(cloud.rows(), 3);
    for (Eigen::Index i = 0; i < cloud.rows(); ++i) {
      const Eigen::Vector3d p = cloud.row(i).transpose();
      moved.row(i) = apply_point(g, p).transpose();
    }
    const Twist fit = fit_twist(cloud, moved, dt);
    CHECK((fit.omega - gt.omega).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((fit.v - gt.v).cwiseAbs().maxCoeff() < 1e-9);
  }

  // degenerate configurations
  Eigen::MatrixXd pair(2, 3);
  pair << 0, 0, 0, 1, 1, 1;
  CHECK_THROWS_AS(fit_twist(pair, pair, 1.0), DegenerateConfiguration);
  Eigen::MatrixXd line(10, 3);
  for (int i = 0; i < 10; ++i) line.row(i) = i * Eigen::RowVector3d(1, 2, -1);
  CHECK_THROWS_AS(fit_twist(line, line, 1.0), DegenerateConfiguration);
}

TEST_CASE("fit_twist under noise: 95th percentile stays small") {
  Rng rng(13);
  std::vector<double> errors;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::MatrixXd cloud(50, 3);
    for (Eigen::Index i = 0; i < cloud.size(); ++i) cloud(i) = rng.uniform(-1, 1);
    Twist gt;
    gt.omega = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized() *
               rng.uniform(0.2, 2.0);
    gt.v = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    const double dt = 0.5;
    const RigidTransform g = exp_se3(scale_twist(dt, gt));
    Eigen::MatrixXd moved(50, 3);
    for (Eigen::Index i = 0; i < 50; ++i) {
      const Eigen::Vector3d p = cloud.row(i).transpose();
      moved.row(i) = (apply_point(g, p) +
                      1e-3 * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()))
                         .transpose();
    }
    const Twist fit = fit_twist(cloud, moved, dt);
    double err = (fit.omega - gt.omega).cwiseAbs().maxCoeff();
    err = std::max(err, (fit.v - gt.v).cwiseAbs().maxCoeff());
    errors.push_back(err);
  }
  std::sort(errors.begin(), errors.end());
  CHECK(errors[94] < 1e-2);
}

TEST_CASE("scene spec json parsing and validation") {
  const std::string text = R"({
    "aabb": {"min": [-1.5, -1.5, -1.5], "max": [1.5, 1.5, 1.5]},
    "frame_count": 4,
    "train_frame_count": 3,
    "samples_per_ray": 32,
    "seed": 9,
    "primitives": [
      {"type": "sphere", "center": [0.4, 0, 0], "radius": 0.2, "density": 25,
       "rgb": [1, 0, 0],
       "motion": [{"t_start": 0, "omega": [0, 0, 1.0], "v": [0.1, 0, 0]}]},
      {"type": "box", "center": [-0.4, 0, 0], "half_extents": [0.15, 0.1, 0.2],
       "density": 30, "rgb": [0, 0, 1]}
    ],
    "cameras": {"count": 4, "holdout": [2], "radius": 3.0, "near": 1.5, "far": 4.5,
                "width": 24, "height": 24}
  })";
  const SceneSpec spec = SceneSpec::from_json_text(text);
  CHECK(spec.primitives.size() == 2);
  CHECK(spec.cameras.size() == 4);
  CHECK(spec.train_cameras == std::vector<int>{0, 1, 3});
  CHECK(spec.holdout_cameras == std::vector<int>{2});
  spec.validate();

  // every generated camera looks at the origin
  for (const auto& cam : spec.cameras) {
    const Eigen::Vector3d forward = -cam.cam_to_world.R.col(2);
    const Eigen::Vector3d to_target = (-cam.cam_to_world.t).normalized();
    CHECK((forward - to_target).norm() < 1e-12);
  }

  CHECK_THROWS_AS(SceneSpec::from_json_text("{ not json"), ParseError);

  // a primitive escaping the box is rejected
  SceneSpec bad = spec;
  bad.primitives[0].motion[0].xi.v = Eigen::Vector3d(5, 0, 0);
  CHECK_THROWS_AS(bad.validate(), DatasetInvalid);
}

TEST_CASE("dataset rendering: background, time invariance, determinism") {
  const fs::path out = fs::temp_directory_path() / "lieflow_scenegen_test";
  fs::remove_all(out);

  // empty scene -> pure background frame
  SceneSpec empty = basic_scene();
  empty.background = Eigen::Vector3d(0.25, 0.5, 0.75);
  empty.primitives[0].density = 40.0;
  empty.primitives[0].center = Eigen::Vector3d(0, 0, 0);
  empty.primitives[0].radius = 1e-9;  // effectively invisible
  empty.frame_count = 1;
  empty.train_frame_count = 1;
  render_dataset(empty, (out / "empty").string());
  const Image frame = read_png((out / "empty" / "frames" / "cam00_f000.png").string());
  for (int r = 0; r < frame.height; ++r) {
    for (int c = 0; c < frame.width; ++c) {
      CHECK(frame.at(r, c, 0) == doctest::Approx(0.25).epsilon(0.01));
      CHECK(frame.at(r, c, 1) == doctest::Approx(0.5).epsilon(0.01));
      CHECK(frame.at(r, c, 2) == doctest::Approx(0.75).epsilon(0.01));
    }
  }

  // static scene: frames are byte-identical
  SceneSpec still = basic_scene();
  still.primitives[0].motion.clear();
  still.frame_count = 2;
  still.train_frame_count = 2;
  render_dataset(still, (out / "static").string());
  CHECK(read_file(out / "static" / "frames" / "cam00_f000.png") ==
        read_file(out / "static" / "frames" / "cam00_f001.png"));

  // rendering twice is deterministic
  render_dataset(still, (out / "static2").string());
  CHECK(read_file(out / "static" / "frames" / "cam00_f000.png") ==
        read_file(out / "static2" / "frames" / "cam00_f000.png"));
  CHECK(read_file(out / "static" / "manifest.json") ==
        read_file(out / "static2" / "manifest.json"));
  CHECK(read_file(out / "static" / "tracks.json") == read_file(out / "static2" / "tracks.json"));

  fs::remove_all(out);
}

TEST_CASE("orbiting silhouette tracks the specified angular rate") {
  // camera on +z looking down, sphere orbiting the z axis
  SceneSpec spec = basic_scene();
  spec.frame_count = 8;
  spec.train_frame_count = 8;
  spec.samples_per_ray = 128;
  CameraModel top;
  top.fx = top.fy = 80.0;
  top.cx = top.cy = 32.0;
  top.width = top.height = 64;
  top.near_depth = 1.5;
  top.far_depth = 4.5;
  top.cam_to_world.R = Eigen::Matrix3d::Identity();  // -z view direction
  top.cam_to_world.t = Eigen::Vector3d(0, 0, 3);
  spec.cameras[0] = top;

  const fs::path out = fs::temp_directory_path() / "lieflow_orbit_test";
  fs::remove_all(out);
  render_dataset(spec, out.string());

  const double orbit_radius = spec.primitives[0].center.norm();
  for (int f = 0; f < spec.frame_count; ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "cam00_f%03d.png", f);
    const Image img = read_png((out / "frames" / name).string());
    double cx = 0, cy = 0, mass = 0;
    for (int r = 0; r < img.height; ++r) {
      for (int c = 0; c < img.width; ++c) {
        const double w = img.at(r, c, 0);  // red channel of the sphere
        cx += w * c;
        cy += w * r;
        mass += w;
      }
    }
    REQUIRE(mass > 0);
    cx /= mass;
    cy /= mass;
    const double theta = M_PI * f / (spec.frame_count - 1.0);
    // project the expected center: x right, y up -> row decreases with y
    const Eigen::Vector3d center(orbit_radius * std::cos(theta),
                                 orbit_radius * std::sin(theta), 0.0);
    const double expect_c = top.cx + top.fx * center.x() / 3.0 - 0.5;
    const double expect_r = top.cy - top.fy * center.y() / 3.0 - 0.5;
    CHECK(std::abs(cx - expect_c) < 0.5);
    CHECK(std::abs(cy - expect_r) < 0.5);
  }
  fs::remove_all(out);
}
