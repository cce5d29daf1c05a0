#include "lieflow/se3field.hpp"

#include <cmath>

#include "lieflow/errors.hpp"

namespace lieflow {

Eigen::VectorXd posenc(const Eigen::Vector3d& p, double t, int lp, int lt) {
  return posenc_batch(p.transpose(), t, lp, lt).row(0).transpose();
}

Eigen::MatrixXd posenc_batch(const Eigen::MatrixXd& pts, double t, int lp, int lt) {
  const Eigen::Index batch = pts.rows();
  Eigen::MatrixXd out(batch, posenc_width(lp, lt));
  out.leftCols(3) = pts;
  out.col(3).setConstant(t);
  int c = 4;
  for (int k = 0; k < lp; ++k) {
    const double f = M_PI * std::pow(2.0, k);
    out.middleCols(c, 3) = (f * pts).array().sin();
    out.middleCols(c + 3, 3) = (f * pts).array().cos();
    c += 6;
  }
  for (int k = 0; k < lt; ++k) {
    const double f = M_PI * std::pow(2.0, k);
    out.col(c) = Eigen::VectorXd::Constant(batch, std::sin(f * t));
    out.col(c + 1) = Eigen::VectorXd::Constant(batch, std::cos(f * t));
    c += 2;
  }
  return out;
}

ReferenceSchedule ReferenceSchedule::make(std::vector<double> frame_times, int stride) {
  if (stride <= 0) throw std::invalid_argument("ReferenceSchedule: stride must be positive");
  ReferenceSchedule s;
  s.frame_count = static_cast<int>(frame_times.size());
  s.stride = stride;
  s.frame_times = std::move(frame_times);
  for (int i = 0; i < s.frame_count; i += stride) {
    s.ref_frames.push_back(i);
    s.ref_times.push_back(s.frame_times[i]);
  }
  return s;
}

bool ReferenceSchedule::is_reference_time(double t, double tol) const {
  for (double rt : ref_times) {
    if (std::abs(rt - t) <= tol) return true;
  }
  return false;
}

double nearest_ref(double t_i, const ReferenceSchedule& schedule) {
  if (schedule.ref_times.empty()) throw EmptySchedule("nearest_ref: no reference frames");
  double best = schedule.ref_times.front();
  double best_dist = std::abs(best - t_i);
  for (double rt : schedule.ref_times) {
    const double d = std::abs(rt - t_i);
    // strict improvement only, so ties keep the earlier reference
    if (d < best_dist - 1e-15) {
      best = rt;
      best_dist = d;
    }
  }
  return best;
}

Se3Field::Se3Field(const Se3FieldConfig& cfg, ParamStore& store, Rng& rng) : cfg_(cfg) {
  cfg_.aabb.require_valid();
  std::vector<int> dims;
  dims.push_back(posenc_width(cfg_.lp, cfg_.lt));
  for (int i = 0; i < cfg_.layers - 1; ++i) dims.push_back(cfg_.hidden);
  dims.push_back(3);
  omega_branch_ = Mlp::create(store, "se3.omega", dims, rng, /*zero_init_last=*/true);
  v_branch_ = Mlp::create(store, "se3.v", dims, rng, /*zero_init_last=*/true);
}

Se3Field::Se3Field(const Se3FieldConfig& cfg, const ParamStore& store) : cfg_(cfg) {
  cfg_.aabb.require_valid();
  std::vector<int> dims;
  dims.push_back(posenc_width(cfg_.lp, cfg_.lt));
  for (int i = 0; i < cfg_.layers - 1; ++i) dims.push_back(cfg_.hidden);
  dims.push_back(3);
  omega_branch_ = Mlp::bind(store, "se3.omega", dims);
  v_branch_ = Mlp::bind(store, "se3.v", dims);
}

Eigen::MatrixXd Se3Field::encode_points(const Eigen::MatrixXd& pts, double t) const {
  Eigen::MatrixXd sym(pts.rows(), 3);
  const Eigen::Vector3d lo = cfg_.aabb.min;
  const Eigen::Vector3d inv = cfg_.aabb.extent().cwiseInverse();
  for (int a = 0; a < 3; ++a) {
    sym.col(a) = 2.0 * inv[a] * (pts.col(a).array() - lo[a]) - 1.0;
  }
  return posenc_batch(sym, t, cfg_.lp, cfg_.lt);
}

Twist Se3Field::twist(const ParamStore& store, const Eigen::Vector3d& p, double t) const {
  Eigen::MatrixXd omega, v;
  twist_batch(store, p.transpose(), t, omega, v);
  return Twist{omega.row(0).transpose(), v.row(0).transpose()};
}

void Se3Field::twist_batch(const ParamStore& store, const Eigen::MatrixXd& pts, double t,
                           Eigen::MatrixXd& omega_out, Eigen::MatrixXd& v_out) const {
  const Eigen::MatrixXd enc = encode_points(pts, t);
  omega_out = omega_branch_.forward(store, enc);
  v_out = v_branch_.forward(store, enc);
  if (cfg_.ablation == Ablation::kTranslationOnly) omega_out.setZero();
  if (cfg_.ablation == Ablation::kRotationOnly) v_out.setZero();
}

namespace {

// Trapezoidal integral of the twist along [t_i, t_k] at fixed points.
void integrate_twist_batch(const Se3Field& field, const ParamStore& store,
                           const Eigen::MatrixXd& pts, double t_i, double t_k, int steps,
                           Eigen::MatrixXd& omega_bar, Eigen::MatrixXd& v_bar,
                           const std::function<void(const Se3Field&, const ParamStore&,
                                                    const Eigen::MatrixXd&, double,
                                                    Eigen::MatrixXd&, Eigen::MatrixXd&)>& eval) {
  const double dt = (t_k - t_i) / steps;
  omega_bar = Eigen::MatrixXd::Zero(pts.rows(), 3);
  v_bar = Eigen::MatrixXd::Zero(pts.rows(), 3);
  for (int j = 0; j <= steps; ++j) {
    const double tau = t_i + dt * j;
    const double w = (j == 0 || j == steps) ? 0.5 * dt : dt;
    Eigen::MatrixXd om, vv;
    eval(field, store, pts, tau, om, vv);
    omega_bar += w * om;
    v_bar += w * vv;
  }
}

}  // namespace

RigidTransform Se3Field::integrate(const ParamStore& store, const Eigen::Vector3d& p, double t_i,
                                   double t_k, int steps) const {
  if (steps < 1) throw std::invalid_argument("integrate: steps must be >= 1");
  const TwistField field = [&](const Eigen::Vector3d& q, double tau) {
    return twist(store, q, tau);
  };
  return integrate_twist_field(field, p, t_i, t_k, steps, cfg_.integrator);
}

RigidTransform integrate_twist_field(const TwistField& field, const Eigen::Vector3d& p,
                                     double t_i, double t_k, int steps, Integrator mode) {
  if (steps < 1) throw std::invalid_argument("integrate: steps must be >= 1");
  if (t_i == t_k) return RigidTransform{};
  const double dt = (t_k - t_i) / steps;

  if (mode == Integrator::kExpOfIntegral) {
    Twist acc;
    for (int j = 0; j <= steps; ++j) {
      const double w = (j == 0 || j == steps) ? 0.5 * dt : dt;
      const Twist xi = field(p, t_i + dt * j);
      acc.omega += w * xi.omega;
      acc.v += w * xi.v;
    }
    return exp_se3(acc);
  }

  // product of per-step midpoint exponentials, chronological from t_i
  RigidTransform g;
  for (int j = 0; j < steps; ++j) {
    const Twist xi = field(p, t_i + dt * (j + 0.5));
    g = compose(exp_se3(scale_twist(dt, xi)), g);
  }
  return g;
}

std::pair<Eigen::Vector3d, double> Se3Field::warp_to_canonical(const ParamStore& store,
                                                               const ReferenceSchedule& schedule,
                                                               const Eigen::Vector3d& p,
                                                               double t_i, int steps) const {
  const double t_hat = nearest_ref(t_i, schedule);
  if (t_hat == t_i) return {p, t_hat};
  const RigidTransform g = integrate(store, p, t_i, t_hat, steps);
  return {apply_point(g, p), t_hat};
}

void Se3Field::warp_batch(const ParamStore& store, const Eigen::MatrixXd& pts, double t_i,
                          double t_k, int steps, Eigen::MatrixXd& warped_out) const {
  warped_out.resize(pts.rows(), 3);
  if (t_i == t_k) {
    warped_out = pts;
    return;
  }
  const double dt = (t_k - t_i) / steps;

  if (cfg_.integrator == Integrator::kExpOfIntegral) {
    Eigen::MatrixXd omega_bar, v_bar;
    integrate_twist_batch(*this, store, pts, t_i, t_k, steps, omega_bar, v_bar,
                          [](const Se3Field& f, const ParamStore& s, const Eigen::MatrixXd& q,
                             double tau, Eigen::MatrixXd& om, Eigen::MatrixXd& vv) {
                            f.twist_batch(s, q, tau, om, vv);
                          });
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      const RigidTransform g =
          exp_se3(Twist{omega_bar.row(i).transpose(), v_bar.row(i).transpose()});
      const Eigen::Vector3d p = pts.row(i).transpose();
      warped_out.row(i) = apply_point(g, p).transpose();
    }
    return;
  }

  warped_out = pts;
  for (int j = 0; j < steps; ++j) {
    Eigen::MatrixXd om, vv;
    twist_batch(store, pts, t_i + dt * (j + 0.5), om, vv);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      const RigidTransform g =
          exp_se3(Twist{(dt * om.row(i)).transpose(), (dt * vv.row(i)).transpose()});
      const Eigen::Vector3d p = warped_out.row(i).transpose();
      warped_out.row(i) = apply_point(g, p).transpose();
    }
  }
}

Se3Field::TapeTwist Se3Field::apply_ablation(ad::Tape& tape, ad::Var omega, ad::Var v) const {
  TapeTwist out{omega, v};
  if (cfg_.ablation == Ablation::kTranslationOnly) out.omega = tape.scale(omega, 0.0);
  if (cfg_.ablation == Ablation::kRotationOnly) out.v = tape.scale(v, 0.0);
  return out;
}

Se3Field::TapeTwist Se3Field::twist_tape(ad::Tape& tape, const Eigen::MatrixXd& pts,
                                         double t) const {
  const ad::Var enc = tape.constant(encode_points(pts, t));
  return apply_ablation(tape, omega_branch_.forward(tape, enc), v_branch_.forward(tape, enc));
}

namespace {

struct Vec3Vars {
  ad::Var x, y, z;
};

Vec3Vars cross_vars(ad::Tape& t, const Vec3Vars& a, const Vec3Vars& b) {
  return {t.sub(t.mul(a.y, b.z), t.mul(a.z, b.y)),
          t.sub(t.mul(a.z, b.x), t.mul(a.x, b.z)),
          t.sub(t.mul(a.x, b.y), t.mul(a.y, b.x))};
}

Vec3Vars split_cols(ad::Tape& t, ad::Var m) {
  return {t.col(m, 0), t.col(m, 1), t.col(m, 2)};
}

// Rodrigues applied on the tape, batched over rows:
//   R p = p + a (w x p) + b (w x (w x p)),   t = v + b (w x v) + c (w x (w x v))
// with a, b, c the angle coefficients of theta^2 = |w|^2.
Vec3Vars exp_apply_tape(ad::Tape& t, ad::Var omega, ad::Var v, const Vec3Vars& p) {
  const Vec3Vars w = split_cols(t, omega);
  const Vec3Vars vv = split_cols(t, v);
  const ad::Var theta_sq =
      t.add(t.add(t.mul(w.x, w.x), t.mul(w.y, w.y)), t.mul(w.z, w.z));
  const ad::Var ca = t.rot_coeff_a(theta_sq);
  const ad::Var cb = t.rot_coeff_b(theta_sq);
  const ad::Var cc = t.rot_coeff_c(theta_sq);

  const Vec3Vars wp = cross_vars(t, w, p);
  const Vec3Vars wwp = cross_vars(t, w, wp);
  const Vec3Vars wv = cross_vars(t, w, vv);
  const Vec3Vars wwv = cross_vars(t, w, wv);

  auto axis = [&](ad::Var pc, ad::Var wpc, ad::Var wwpc, ad::Var vc, ad::Var wvc, ad::Var wwvc) {
    const ad::Var rp = t.add(pc, t.add(t.mul(ca, wpc), t.mul(cb, wwpc)));
    const ad::Var tr = t.add(vc, t.add(t.mul(cb, wvc), t.mul(cc, wwvc)));
    return t.add(rp, tr);
  };
  return {axis(p.x, wp.x, wwp.x, vv.x, wv.x, wwv.x),
          axis(p.y, wp.y, wwp.y, vv.y, wv.y, wwv.y),
          axis(p.z, wp.z, wwp.z, vv.z, wv.z, wwv.z)};
}

}  // namespace

Se3Field::TapeWarp Se3Field::warp_tape(ad::Tape& tape, const Eigen::MatrixXd& pts, double t_i,
                                       double t_k, int steps) const {
  if (steps < 1) throw std::invalid_argument("warp_tape: steps must be >= 1");
  const Eigen::Index batch = pts.rows();
  const Vec3Vars p0 = {tape.constant(pts.col(0)), tape.constant(pts.col(1)),
                       tape.constant(pts.col(2))};

  TapeWarp out;
  if (t_i == t_k) {
    // identity warp; still expose a zero twist so struct losses are defined
    const ad::Var zero = tape.constant(Eigen::MatrixXd::Zero(batch, 3));
    out.integrated = {zero, zero};
    out.x = p0.x;
    out.y = p0.y;
    out.z = p0.z;
    return out;
  }

  const double dt = (t_k - t_i) / steps;

  if (cfg_.integrator == Integrator::kExpOfIntegral) {
    ad::Var omega_bar, v_bar;
    for (int j = 0; j <= steps; ++j) {
      const double w = (j == 0 || j == steps) ? 0.5 * dt : dt;
      const TapeTwist xi = twist_tape(tape, pts, t_i + dt * j);
      const ad::Var om = tape.scale(xi.omega, w);
      const ad::Var vv = tape.scale(xi.v, w);
      omega_bar = j == 0 ? om : tape.add(omega_bar, om);
      v_bar = j == 0 ? vv : tape.add(v_bar, vv);
    }
    out.integrated = {omega_bar, v_bar};
    const Vec3Vars warped = exp_apply_tape(tape, omega_bar, v_bar, p0);
    out.x = warped.x;
    out.y = warped.y;
    out.z = warped.z;
    return out;
  }

  Vec3Vars cur = p0;
  TapeTwist last{};
  for (int j = 0; j < steps; ++j) {
    const TapeTwist xi = twist_tape(tape, pts, t_i + dt * (j + 0.5));
    last = {tape.scale(xi.omega, dt), tape.scale(xi.v, dt)};
    cur = exp_apply_tape(tape, last.omega, last.v, cur);
  }
  out.integrated = last;
  out.x = cur.x;
  out.y = cur.y;
  out.z = cur.z;
  return out;
}

}  // namespace lieflow
