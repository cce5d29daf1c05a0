#include "lieflow/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "lieflow/errors.hpp"

namespace lieflow {

namespace fs = std::filesystem;
using nlohmann::json;

RigidTransform Primitive::pose(double t) const {
  if (motion.empty()) return RigidTransform{};
  RigidTransform g;
  double t_seg = motion.front().t_start;
  for (std::size_t j = 0; j < motion.size(); ++j) {
    const double t_end = j + 1 < motion.size() ? motion[j + 1].t_start : t;
    const double span = std::min(t, t_end) - t_seg;
    if (span > 0.0) {
      g = compose(exp_se3(scale_twist(span, motion[j].xi)), g);
    }
    if (t <= t_end) break;
    t_seg = t_end;
  }
  return g;
}

bool Primitive::contains_local(const Eigen::Vector3d& p) const {
  const Eigen::Vector3d d = p - center;
  if (kind == Kind::kSphere) return d.squaredNorm() <= radius * radius;
  return (d.cwiseAbs().array() <= half_extents.array()).all();
}

std::vector<double> SceneSpec::timestamps() const {
  std::vector<double> ts(frame_count);
  for (int f = 0; f < frame_count; ++f) {
    ts[f] = frame_count > 1 ? static_cast<double>(f) / (frame_count - 1) : 0.0;
  }
  return ts;
}

namespace {

Eigen::Vector3d vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

int line_of_offset(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

RigidTransform look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                       const Eigen::Vector3d& up) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  const Eigen::Vector3d side = forward.cross(up).normalized();
  const Eigen::Vector3d true_up = side.cross(forward);
  RigidTransform g;
  g.R.col(0) = side;
  g.R.col(1) = true_up;
  g.R.col(2) = -forward;
  g.t = eye;
  return g;
}

}  // namespace

SceneSpec SceneSpec::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("scene: parse error at line " +
                     std::to_string(line_of_offset(text, e.byte)) + ": " + e.what());
  }

  try {
    SceneSpec spec;
    spec.aabb.min = vec3_from(j.at("aabb").at("min"));
    spec.aabb.max = vec3_from(j.at("aabb").at("max"));
    spec.frame_count = j.at("frame_count").get<int>();
    spec.train_frame_count = j.value("train_frame_count", spec.frame_count);
    spec.samples_per_ray = j.value("samples_per_ray", 96);
    spec.track_points = j.value("track_points", 50);
    spec.seed = j.value("seed", 1ULL);
    if (j.contains("background")) spec.background = vec3_from(j["background"]);

    for (const auto& pj : j.at("primitives")) {
      Primitive p;
      const std::string kind = pj.at("type").get<std::string>();
      if (kind == "sphere") {
        p.kind = Primitive::Kind::kSphere;
        p.radius = pj.at("radius").get<double>();
      } else if (kind == "box") {
        p.kind = Primitive::Kind::kBox;
        p.half_extents = vec3_from(pj.at("half_extents"));
      } else {
        throw ParseError("scene: unknown primitive type '" + kind + "'");
      }
      p.center = vec3_from(pj.at("center"));
      p.density = pj.at("density").get<double>();
      p.rgb = vec3_from(pj.at("rgb"));
      if (pj.contains("motion")) {
        for (const auto& mj : pj["motion"]) {
          MotionSegment seg;
          seg.t_start = mj.value("t_start", 0.0);
          seg.xi.omega = vec3_from(mj.at("omega"));
          seg.xi.v = vec3_from(mj.at("v"));
          p.motion.push_back(seg);
        }
        std::sort(p.motion.begin(), p.motion.end(),
                  [](const MotionSegment& a, const MotionSegment& b) {
                    return a.t_start < b.t_start;
                  });
      }
      spec.primitives.push_back(std::move(p));
    }

    const json& cj = j.at("cameras");
    const int count = cj.at("count").get<int>();
    const double radius = cj.at("radius").get<double>();
    const double elev_min = cj.value("min_elevation", 0.0);
    const double elev_max = cj.value("max_elevation", 0.4);
    const double fov_deg = cj.value("fov_deg", 45.0);
    const int width = cj.value("width", 64);
    const int height = cj.value("height", 64);
    const double near = cj.at("near").get<double>();
    const double far = cj.at("far").get<double>();
    const Eigen::Vector3d target =
        cj.contains("target") ? vec3_from(cj["target"]) : Eigen::Vector3d::Zero();

    const double focal = width / (2.0 * std::tan(fov_deg * M_PI / 360.0));
    for (int i = 0; i < count; ++i) {
      const double azimuth = 2.0 * M_PI * i / count;
      // golden-ratio sequence spreads elevations without repeating patterns
      const double frac = std::fmod(0.5 + i * 0.6180339887498949, 1.0);
      const double elevation = elev_min + (elev_max - elev_min) * frac;
      const Eigen::Vector3d eye =
          target + radius * Eigen::Vector3d(std::cos(elevation) * std::cos(azimuth),
                                            std::cos(elevation) * std::sin(azimuth),
                                            std::sin(elevation));
      CameraModel cam;
      cam.fx = cam.fy = focal;
      cam.cx = width / 2.0;
      cam.cy = height / 2.0;
      cam.width = width;
      cam.height = height;
      cam.near_depth = near;
      cam.far_depth = far;
      cam.cam_to_world = look_at(eye, target, Eigen::Vector3d::UnitZ());
      spec.cameras.push_back(cam);
    }

    std::vector<int> holdout = cj.value("holdout", std::vector<int>{});
    for (int i = 0; i < count; ++i) {
      if (std::find(holdout.begin(), holdout.end(), i) != holdout.end()) {
        spec.holdout_cameras.push_back(i);
      } else {
        spec.train_cameras.push_back(i);
      }
    }
    return spec;
  } catch (const json::exception& e) {
    throw ParseError(std::string("scene: ") + e.what());
  }
}

SceneSpec SceneSpec::from_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoFailure("scene: cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_json_text(text);
}

void SceneSpec::validate() const {
  aabb.require_valid();
  if (primitives.empty()) throw DatasetInvalid("scene: no primitives");
  if (frame_count < 1 || train_frame_count < 1 || train_frame_count > frame_count) {
    throw DatasetInvalid("scene: bad frame layout");
  }
  if (cameras.empty() || train_cameras.empty()) throw DatasetInvalid("scene: no cameras");
  for (const auto& p : primitives) {
    if (p.density <= 0.0) throw DatasetInvalid("scene: densities must be positive");
  }
  // sampled sweep: primitive extremal points must stay inside the box
  for (const auto& p : primitives) {
    const double reach =
        p.kind == Primitive::Kind::kSphere ? p.radius : p.half_extents.norm();
    for (int s = 0; s <= 200; ++s) {
      const double t = s / 200.0;
      const Eigen::Vector3d c = apply_point(p.pose(t), p.center);
      for (int a = 0; a < 3; ++a) {
        if (c[a] - reach < aabb.min[a] || c[a] + reach > aabb.max[a]) {
          throw DatasetInvalid("scene: primitive leaves the box near t = " + std::to_string(t));
        }
      }
    }
  }
}

FieldSample analytic_field(const SceneSpec& spec, const Eigen::Vector3d& p, double t) {
  for (const auto& prim : spec.primitives) {
    const Eigen::Vector3d local = apply_point(inverse(prim.pose(t)), p);
    if (prim.contains_local(local)) {
      return FieldSample{prim.density, prim.rgb};
    }
  }
  return FieldSample{};
}

BatchFieldFn analytic_field_fn(const SceneSpec& spec) {
  return [spec](const Eigen::MatrixXd& pts, double t, const Eigen::MatrixXd& /*dirs*/,
                Eigen::VectorXd& sigma, Eigen::MatrixXd& rgb) {
    sigma.resize(pts.rows());
    rgb.resize(pts.rows(), 3);
    std::vector<RigidTransform> inv_poses;
    inv_poses.reserve(spec.primitives.size());
    for (const auto& prim : spec.primitives) inv_poses.push_back(inverse(prim.pose(t)));
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      sigma[i] = 0.0;
      rgb.row(i).setZero();
      for (std::size_t k = 0; k < spec.primitives.size(); ++k) {
        const Eigen::Vector3d q = pts.row(i).transpose();
        const Eigen::Vector3d local = apply_point(inv_poses[k], q);
        if (spec.primitives[k].contains_local(local)) {
          sigma[i] = spec.primitives[k].density;
          rgb.row(i) = spec.primitives[k].rgb.transpose();
          break;
        }
      }
    }
  };
}

TrackSet make_tracks(const SceneSpec& spec, int primitive_index, int k_points, Rng& rng) {
  const Primitive& prim = spec.primitives.at(primitive_index);
  TrackSet tracks;
  tracks.primitive = primitive_index;
  tracks.timestamps = spec.timestamps();
  tracks.base_points.resize(k_points, 3);
  for (int k = 0; k < k_points; ++k) {
    Eigen::Vector3d p;
    if (prim.kind == Primitive::Kind::kSphere) {
      Eigen::Vector3d dir(rng.normal(), rng.normal(), rng.normal());
      while (dir.norm() < 1e-9) dir = {rng.normal(), rng.normal(), rng.normal()};
      p = prim.center + prim.radius * dir.normalized();
    } else {
      p = prim.center;
      const int face_axis = rng.uniform_int(3);
      const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
      for (int a = 0; a < 3; ++a) {
        p[a] += a == face_axis ? side * prim.half_extents[a]
                               : rng.uniform(-prim.half_extents[a], prim.half_extents[a]);
      }
    }
    tracks.base_points.row(k) = p.transpose();
  }
  for (double t : tracks.timestamps) {
    const RigidTransform g = prim.pose(t);
    tracks.poses.push_back(g);
    Eigen::MatrixXd pos(k_points, 3);
    for (int k = 0; k < k_points; ++k) {
      const Eigen::Vector3d base = tracks.base_points.row(k).transpose();
      pos.row(k) = apply_point(g, base).transpose();
    }
    tracks.positions.push_back(std::move(pos));
  }
  return tracks;
}

Twist fit_twist(const Eigen::MatrixXd& p0s, const Eigen::MatrixXd& pts, double dt) {
  if (p0s.rows() != pts.rows() || p0s.cols() != 3 || pts.cols() != 3) {
    throw ShapeMismatch("fit_twist: point sets must be matching Kx3");
  }
  if (p0s.rows() < 3) throw DegenerateConfiguration("fit_twist: need at least 3 points");
  if (!(dt > 0.0)) throw std::invalid_argument("fit_twist: dt must be positive");

  const Eigen::RowVector3d mean0 = p0s.colwise().mean();
  const Eigen::RowVector3d mean1 = pts.colwise().mean();
  const Eigen::MatrixXd q0 = p0s.rowwise() - mean0;
  const Eigen::MatrixXd q1 = pts.rowwise() - mean1;

  // collinear clouds leave the rotation about their axis unconstrained
  Eigen::JacobiSVD<Eigen::MatrixXd> spread(q0);
  const auto& sv = spread.singularValues();
  if (sv(1) <= 1e-9 * std::max(1.0, sv(0))) {
    throw DegenerateConfiguration("fit_twist: points are collinear");
  }

  const Eigen::Matrix3d h = q0.transpose() * q1;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
  RigidTransform g;
  g.R = svd.matrixV() * d * svd.matrixU().transpose();
  g.t = mean1.transpose() - g.R * mean0.transpose();

  const Twist xi = log_se3(g);
  return scale_twist(1.0 / dt, xi);
}

namespace {

json camera_to_json(const CameraModel& cam, int id) {
  json j;
  j["id"] = id;
  j["fx"] = cam.fx;
  j["fy"] = cam.fy;
  j["cx"] = cam.cx;
  j["cy"] = cam.cy;
  j["width"] = cam.width;
  j["height"] = cam.height;
  j["near"] = cam.near_depth;
  j["far"] = cam.far_depth;
  std::vector<double> m;
  const Eigen::Matrix4d g = cam.cam_to_world.matrix();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m.push_back(g(r, c));
  j["cam_to_world"] = m;  // row-major
  return j;
}

std::string frame_name(int cam, int frame) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "cam%02d_f%03d.png", cam, frame);
  return buf;
}

}  // namespace

void render_dataset(const SceneSpec& spec, const std::string& out_dir) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "frames", ec);
  if (ec) throw IoFailure("render_dataset: cannot create '" + out_dir + "'");

  const auto ts = spec.timestamps();
  RenderConfig cfg;
  cfg.samples_per_ray = spec.samples_per_ray;
  cfg.background = spec.background;
  const BatchFieldFn field = analytic_field_fn(spec);

  for (std::size_t c = 0; c < spec.cameras.size(); ++c) {
    for (int f = 0; f < spec.frame_count; ++f) {
      const Image img = render_image_field(field, spec.cameras[c], ts[f], cfg);
      write_png((fs::path(out_dir) / "frames" / frame_name(static_cast<int>(c), f)).string(),
                img);
    }
  }

  json poses;
  poses["convention"] =
      "right-handed; camera x right, y up, looks down -z; cam_to_world is row-major 4x4";
  poses["cameras"] = json::array();
  for (std::size_t c = 0; c < spec.cameras.size(); ++c) {
    poses["cameras"].push_back(camera_to_json(spec.cameras[c], static_cast<int>(c)));
  }
  std::ofstream pf(fs::path(out_dir) / "poses.json");
  pf << poses.dump(2) << "\n";
  if (!pf) throw IoFailure("render_dataset: cannot write poses.json");

  json manifest;
  manifest["format_version"] = 1;
  manifest["frame_count"] = spec.frame_count;
  manifest["timestamps"] = ts;
  manifest["train_cameras"] = spec.train_cameras;
  manifest["holdout_cameras"] = spec.holdout_cameras;
  std::vector<int> train_frames, extrap_frames;
  for (int f = 0; f < spec.frame_count; ++f) {
    (f < spec.train_frame_count ? train_frames : extrap_frames).push_back(f);
  }
  manifest["train_frames"] = train_frames;
  manifest["extrapolation_frames"] = extrap_frames;
  manifest["aabb"]["min"] = std::vector<double>{spec.aabb.min.x(), spec.aabb.min.y(),
                                                spec.aabb.min.z()};
  manifest["aabb"]["max"] = std::vector<double>{spec.aabb.max.x(), spec.aabb.max.y(),
                                                spec.aabb.max.z()};
  manifest["background"] =
      std::vector<double>{spec.background.x(), spec.background.y(), spec.background.z()};
  // evaluation-only ground truth; the trainer never reads this key
  json gt = json::array();
  for (const auto& prim : spec.primitives) {
    json motion = json::array();
    for (const auto& seg : prim.motion) {
      json sj;
      sj["t_start"] = seg.t_start;
      sj["omega"] = std::vector<double>{seg.xi.omega.x(), seg.xi.omega.y(), seg.xi.omega.z()};
      sj["v"] = std::vector<double>{seg.xi.v.x(), seg.xi.v.y(), seg.xi.v.z()};
      motion.push_back(sj);
    }
    gt.push_back({{"motion", motion}});
  }
  manifest["ground_truth"]["twists"] = gt;
  std::ofstream mf(fs::path(out_dir) / "manifest.json");
  mf << manifest.dump(2) << "\n";
  if (!mf) throw IoFailure("render_dataset: cannot write manifest.json");

  // per-primitive tracks with per-frame-pair ground-truth twists
  Rng rng(spec.seed);
  json tracks_json;
  tracks_json["primitives"] = json::array();
  for (std::size_t pi = 0; pi < spec.primitives.size(); ++pi) {
    const TrackSet tr = make_tracks(spec, static_cast<int>(pi), spec.track_points, rng);
    json tj;
    tj["index"] = tr.primitive;
    tj["timestamps"] = tr.timestamps;
    json base = json::array();
    for (Eigen::Index k = 0; k < tr.base_points.rows(); ++k) {
      base.push_back(std::vector<double>{tr.base_points(k, 0), tr.base_points(k, 1),
                                         tr.base_points(k, 2)});
    }
    tj["base_points"] = base;
    json frames = json::array();
    for (const auto& pos : tr.positions) {
      json fr = json::array();
      for (Eigen::Index k = 0; k < pos.rows(); ++k) {
        fr.push_back(std::vector<double>{pos(k, 0), pos(k, 1), pos(k, 2)});
      }
      frames.push_back(fr);
    }
    tj["positions"] = frames;
    json pair_twists = json::array();
    for (std::size_t f = 0; f + 1 < tr.poses.size(); ++f) {
      const double dt = tr.timestamps[f + 1] - tr.timestamps[f];
      const Twist rel = scale_twist(
          1.0 / dt, log_se3(compose(tr.poses[f + 1], inverse(tr.poses[f]))));
      pair_twists.push_back(std::vector<double>{rel.omega.x(), rel.omega.y(), rel.omega.z(),
                                                rel.v.x(), rel.v.y(), rel.v.z()});
    }
    tj["pair_twists"] = pair_twists;
    tracks_json["primitives"].push_back(tj);
  }
  std::ofstream tf(fs::path(out_dir) / "tracks.json");
  tf << tracks_json.dump(2) << "\n";
  if (!tf) throw IoFailure("render_dataset: cannot write tracks.json");
}

}  // namespace lieflow
