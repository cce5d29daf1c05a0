#include "lieflow/losses.hpp"

#include <cmath>

#include "lieflow/errors.hpp"

namespace lieflow {

RegularizerBatch RegularizerBatch::sample(const Aabb& aabb, int n_points, int n_times,
                                          double h_space, double h_time, Rng& rng) {
  if (n_points < 1 || n_times < 1) throw EmptyInput("RegularizerBatch: empty batch");
  aabb.require_valid();
  const Aabb inner = aabb.shrunk(h_space);
  RegularizerBatch b;
  b.h_space = h_space;
  b.h_time = h_time;
  b.points.resize(n_points, 3);
  for (int i = 0; i < n_points; ++i) {
    for (int a = 0; a < 3; ++a) b.points(i, a) = rng.uniform(inner.min[a], inner.max[a]);
  }
  b.times.resize(n_times);
  for (int i = 0; i < n_times; ++i) b.times[i] = rng.uniform(h_time, 1.0 - h_time);
  return b;
}

Eigen::Vector3d induced_velocity(const TwistField& field, const Eigen::Vector3d& p, double t) {
  const Twist xi = field(p, t);
  return xi.omega.cross(p) + xi.v;
}

double divergence_loss(const TwistField& field, const RegularizerBatch& batch,
                       DivergenceTarget target) {
  const auto velocity = [&](const Eigen::Vector3d& p, double t) {
    return target == DivergenceTarget::kInducedVelocity ? induced_velocity(field, p, t)
                                                        : field(p, t).v;
  };
  const double h = batch.h_space;
  double acc = 0.0;
  for (Eigen::Index m = 0; m < batch.times.size(); ++m) {
    const double t = batch.times[m];
    for (Eigen::Index n = 0; n < batch.points.rows(); ++n) {
      const Eigen::Vector3d p = batch.points.row(n).transpose();
      double div = 0.0;
      for (int d = 0; d < 3; ++d) {
        Eigen::Vector3d hi = p, lo = p;
        hi[d] += h;
        lo[d] -= h;
        div += (velocity(hi, t)[d] - velocity(lo, t)[d]) / (2 * h);
      }
      acc += std::abs(div);
    }
  }
  return acc / static_cast<double>(batch.points.rows() * batch.times.size());
}

double momentum_loss(const TwistField& field, const RegularizerBatch& batch,
                     const Eigen::Vector3d& accel) {
  const double h = batch.h_space;
  const double ht = batch.h_time;
  double acc = 0.0;
  for (Eigen::Index m = 0; m < batch.times.size(); ++m) {
    const double t = batch.times[m];
    for (Eigen::Index n = 0; n < batch.points.rows(); ++n) {
      const Eigen::Vector3d p = batch.points.row(n).transpose();
      const Eigen::Vector3d u = induced_velocity(field, p, t);
      const Eigen::Vector3d du_dt =
          (induced_velocity(field, p, t + ht) - induced_velocity(field, p, t - ht)) / (2 * ht);
      Eigen::Vector3d advect = Eigen::Vector3d::Zero();
      for (int d = 0; d < 3; ++d) {
        Eigen::Vector3d hi = p, lo = p;
        hi[d] += h;
        lo[d] -= h;
        advect += u[d] *
                  (induced_velocity(field, hi, t) - induced_velocity(field, lo, t)) / (2 * h);
      }
      acc += (du_dt + advect - accel).norm();
    }
  }
  return acc / static_cast<double>(batch.points.rows() * batch.times.size());
}

double ortho_penalty(std::span<const RigidTransform> transforms) {
  if (transforms.empty()) throw EmptyInput("ortho_penalty: no transforms");
  double acc = 0.0;
  for (const auto& g : transforms) {
    acc += (g.R * g.R.transpose() - Eigen::Matrix3d::Identity()).norm();
  }
  return acc / static_cast<double>(transforms.size());
}

double se3_struct_loss(std::span<const RigidTransform> transforms,
                       std::span<const Twist> twists) {
  if (transforms.empty() || twists.empty()) throw EmptyInput("se3_struct_loss: empty input");
  double trans = 0.0;
  for (const auto& xi : twists) trans += xi.v.norm();
  return ortho_penalty(transforms) + trans / static_cast<double>(twists.size());
}

double photometric_loss(const Image& rendered, const Image& reference, const Image* mask,
                        PhotometricNorm norm) {
  if (rendered.width != reference.width || rendered.height != reference.height) {
    throw ShapeMismatch("photometric_loss: image shapes disagree");
  }
  if (mask && (mask->width != rendered.width || mask->height != rendered.height)) {
    throw ShapeMismatch("photometric_loss: mask shape disagrees");
  }
  double acc = 0.0;
  std::size_t count = 0;
  for (int r = 0; r < rendered.height; ++r) {
    for (int c = 0; c < rendered.width; ++c) {
      if (mask && mask->at(r, c, 0) <= 0.5) continue;
      for (int ch = 0; ch < 3; ++ch) {
        const double d = rendered.at(r, c, ch) - reference.at(r, c, ch);
        acc += norm == PhotometricNorm::kMse ? d * d : std::abs(d);
        ++count;
      }
    }
  }
  if (count == 0) throw EmptyInput("photometric_loss: mask removed every pixel");
  return acc / static_cast<double>(count);
}

namespace {

// u = omega x p + v with constant points, as three Bx1 columns.
struct VelocityVars {
  ad::Var x, y, z;
};

VelocityVars induced_velocity_tape(ad::Tape& t, const Se3Field& field,
                                   const Eigen::MatrixXd& pts, double time) {
  const Se3Field::TapeTwist xi = field.twist_tape(t, pts, time);
  const ad::Var wx = t.col(xi.omega, 0), wy = t.col(xi.omega, 1), wz = t.col(xi.omega, 2);
  const ad::Var px = t.constant(pts.col(0)), py = t.constant(pts.col(1)),
                pz = t.constant(pts.col(2));
  return {t.add(t.sub(t.mul(wy, pz), t.mul(wz, py)), t.col(xi.v, 0)),
          t.add(t.sub(t.mul(wz, px), t.mul(wx, pz)), t.col(xi.v, 1)),
          t.add(t.sub(t.mul(wx, py), t.mul(wy, px)), t.col(xi.v, 2))};
}

ad::Var velocity_component(const VelocityVars& u, int d) {
  return d == 0 ? u.x : (d == 1 ? u.y : u.z);
}

}  // namespace

ad::Var divergence_loss_tape(ad::Tape& tape, const Se3Field& field,
                             const RegularizerBatch& batch, DivergenceTarget target) {
  const auto velocity = [&](const Eigen::MatrixXd& pts, double t) -> VelocityVars {
    if (target == DivergenceTarget::kInducedVelocity) {
      return induced_velocity_tape(tape, field, pts, t);
    }
    const Se3Field::TapeTwist xi = field.twist_tape(tape, pts, t);
    return {tape.col(xi.v, 0), tape.col(xi.v, 1), tape.col(xi.v, 2)};
  };
  const double h = batch.h_space;
  ad::Var total;
  for (Eigen::Index m = 0; m < batch.times.size(); ++m) {
    const double t = batch.times[m];
    ad::Var div;
    for (int d = 0; d < 3; ++d) {
      Eigen::MatrixXd hi = batch.points, lo = batch.points;
      hi.col(d).array() += h;
      lo.col(d).array() -= h;
      const ad::Var term = tape.scale(
          tape.sub(velocity_component(velocity(hi, t), d),
                   velocity_component(velocity(lo, t), d)),
          1.0 / (2 * h));
      div = d == 0 ? term : tape.add(div, term);
    }
    const ad::Var contrib = tape.sum(tape.abs(div));
    total = m == 0 ? contrib : tape.add(total, contrib);
  }
  return tape.scale(total, 1.0 / static_cast<double>(batch.points.rows() * batch.times.size()));
}

ad::Var momentum_loss_tape(ad::Tape& tape, const Se3Field& field, const RegularizerBatch& batch,
                           const std::string& accel_param) {
  const double h = batch.h_space;
  const double ht = batch.h_time;
  const ad::Var accel = tape.param(accel_param);  // 1x3, broadcast over rows
  ad::Var total;
  for (Eigen::Index m = 0; m < batch.times.size(); ++m) {
    const double t = batch.times[m];
    const VelocityVars u = induced_velocity_tape(tape, field, batch.points, t);
    const VelocityVars u_tp = induced_velocity_tape(tape, field, batch.points, t + ht);
    const VelocityVars u_tm = induced_velocity_tape(tape, field, batch.points, t - ht);

    ad::Var res[3];
    for (int i = 0; i < 3; ++i) {
      res[i] = tape.scale(tape.sub(velocity_component(u_tp, i), velocity_component(u_tm, i)),
                          1.0 / (2 * ht));
    }
    for (int d = 0; d < 3; ++d) {
      Eigen::MatrixXd hi = batch.points, lo = batch.points;
      hi.col(d).array() += h;
      lo.col(d).array() -= h;
      const VelocityVars u_hi = induced_velocity_tape(tape, field, hi, t);
      const VelocityVars u_lo = induced_velocity_tape(tape, field, lo, t);
      const ad::Var ud = velocity_component(u, d);
      for (int i = 0; i < 3; ++i) {
        const ad::Var dui = tape.scale(
            tape.sub(velocity_component(u_hi, i), velocity_component(u_lo, i)), 1.0 / (2 * h));
        res[i] = tape.add(res[i], tape.mul(ud, dui));
      }
    }
    for (int i = 0; i < 3; ++i) {
      res[i] = tape.sub(res[i], tape.col(accel, i));
    }
    const ad::Var norm_sq = tape.add(tape.add(tape.mul(res[0], res[0]), tape.mul(res[1], res[1])),
                                     tape.mul(res[2], res[2]));
    const ad::Var contrib = tape.sum(tape.sqrt(norm_sq));
    total = m == 0 ? contrib : tape.add(total, contrib);
  }
  return tape.scale(total, 1.0 / static_cast<double>(batch.points.rows() * batch.times.size()));
}

ad::Var translation_magnitude_tape(ad::Tape& tape, ad::Var v_rows) {
  const ad::Var sq = tape.row_sum(tape.mul(v_rows, v_rows));
  return tape.mean(tape.sqrt(sq));
}

}  // namespace lieflow
