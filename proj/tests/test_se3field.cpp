#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lieflow/rng.hpp"
#include "lieflow/se3field.hpp"

using namespace lieflow;

namespace {

Se3FieldConfig small_config() {
  Se3FieldConfig cfg;
  cfg.lp = 2;
  cfg.lt = 2;
  cfg.hidden = 16;
  cfg.layers = 3;
  cfg.aabb.min = Eigen::Vector3d(-1, -1, -1);
  cfg.aabb.max = Eigen::Vector3d(1, 1, 1);
  return cfg;
}

// bias-only heads make the field constant: hidden weights of the final layer
// are zero after init, so setting the final bias pins the output.
void make_constant_field(ParamStore& store, const Twist& xi) {
  store.value("se3.omega.b2") = xi.omega.transpose();
  store.value("se3.v.b2") = xi.v.transpose();
}

ReferenceSchedule frames_schedule(int frames, int stride) {
  std::vector<double> times(frames);
  for (int f = 0; f < frames; ++f) times[f] = static_cast<double>(f) / (frames - 1);
  return ReferenceSchedule::make(times, stride);
}

}  // namespace

TEST_CASE("posenc layout and width") {
  const Eigen::VectorXd enc = posenc(Eigen::Vector3d::Zero(), 0.0, 6, 4);
  CHECK(enc.size() == 48);
  CHECK(posenc_width(6, 4) == 48);
  // raw inputs first, then per-frequency sin (zero) and cos (one) blocks
  CHECK(enc.head(4).cwiseAbs().maxCoeff() == 0.0);
  for (int k = 0; k < 6; ++k) {
    CHECK(enc.segment(4 + 6 * k, 3).cwiseAbs().maxCoeff() == 0.0);      // sin
    CHECK((enc.segment(4 + 6 * k + 3, 3).array() - 1.0).abs().maxCoeff() == 0.0);  // cos
  }
  for (int k = 0; k < 4; ++k) {
    CHECK(enc[40 + 2 * k] == 0.0);
    CHECK(enc[40 + 2 * k + 1] == 1.0);
  }

  const Eigen::VectorXd bare = posenc(Eigen::Vector3d(0.2, -0.3, 0.9), 0.7, 0, 0);
  CHECK(bare.size() == 4);
  CHECK(bare[0] == 0.2);
  CHECK(bare[3] == 0.7);
}

TEST_CASE("zero-initialized field returns the zero twist everywhere") {
  Rng rng(31);
  ParamStore store;
  Se3Field field(small_config(), store, rng);
  for (int k = 0; k < 50; ++k) {
    const Eigen::Vector3d p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const Twist xi = field.twist(store, p, rng.uniform());
    CHECK(xi.omega.norm() == 0.0);
    CHECK(xi.v.norm() == 0.0);
  }
}

TEST_CASE("fixed seed gives bit-identical twists") {
  auto build_and_probe = [](std::uint64_t seed) {
    Rng rng(seed);
    ParamStore store;
    Se3Field field(small_config(), store, rng);
    // give the heads signal
    Rng r2(seed + 1);
    for (const char* name : {"se3.omega.w2", "se3.v.w2"}) {
      Eigen::MatrixXd& m = store.value(name);
      for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = r2.normal();
    }
    return field.twist(store, Eigen::Vector3d(0.3, -0.2, 0.5), 0.6);
  };
  const Twist a = build_and_probe(42);
  const Twist b = build_and_probe(42);
  CHECK(a.omega == b.omega);
  CHECK(a.v == b.v);
}

TEST_CASE("nearest reference selection") {
  const ReferenceSchedule sched = frames_schedule(16, 4);
  const double dt = 1.0 / 15.0;
  CHECK(nearest_ref(5 * dt, sched) == doctest::Approx(4 * dt).epsilon(1e-15));
  CHECK(nearest_ref(6 * dt, sched) == doctest::Approx(4 * dt).epsilon(1e-15));  // tie -> earlier
  CHECK(nearest_ref(0.0, sched) == 0.0);
  CHECK(nearest_ref(7 * dt, sched) == doctest::Approx(8 * dt).epsilon(1e-15));

  // with references bracketing the range (17 frames: 0,4,8,12,16), no query
  // is farther than ceil(stride/2) frames from its reference
  const ReferenceSchedule bracketed = frames_schedule(17, 4);
  const double dt17 = 1.0 / 16.0;
  for (int f = 0; f < 17; ++f) {
    const double t = f * dt17;
    CHECK(std::abs(nearest_ref(t, bracketed) - t) <= (2 * dt17) * (1 + 1e-12));
  }

  ReferenceSchedule empty;
  CHECK_THROWS_AS(nearest_ref(0.5, empty), EmptySchedule);
}

TEST_CASE("integration: identity interval, constant field, identity at init") {
  Rng rng(7);
  ParamStore store;
  Se3Field field(small_config(), store, rng);

  // zero field: identity transform for any interval
  for (int k = 0; k < 20; ++k) {
    const Eigen::Vector3d p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const RigidTransform g = field.integrate(store, p, rng.uniform(), rng.uniform(), 4);
    CHECK((g.R - Eigen::Matrix3d::Identity()).norm() < 1e-12);
    CHECK(g.t.norm() < 1e-12);
  }

  // empty interval is exactly the identity
  const RigidTransform id = field.integrate(store, Eigen::Vector3d(0.1, 0.2, 0.3), 0.4, 0.4, 4);
  CHECK((id.matrix() - Eigen::Matrix4d::Identity()).norm() == 0.0);

  // constant field: result equals exp((tk - ti) xi) for any step count
  const Twist xi{Eigen::Vector3d(0.4, -0.2, 0.7), Eigen::Vector3d(0.3, 0.1, -0.5)};
  make_constant_field(store, xi);
  const double ti = 0.15, tk = 0.85;
  const RigidTransform expect = exp_se3(scale_twist(tk - ti, xi));
  for (int steps : {1, 3, 8}) {
    const RigidTransform g = field.integrate(store, Eigen::Vector3d(0.2, 0.0, -0.1), ti, tk, steps);
    CHECK((g.matrix() - expect.matrix()).cwiseAbs().maxCoeff() < 1e-12);
  }

  // backward interval inverts the constant-field transform
  const RigidTransform fwd = field.integrate(store, Eigen::Vector3d::Zero(), 0.2, 0.6, 4);
  const RigidTransform bwd = field.integrate(store, Eigen::Vector3d::Zero(), 0.6, 0.2, 4);
  CHECK((compose(fwd, bwd).matrix() - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("one-parameter consistency on constant fields") {
  Rng rng(11);
  ParamStore store;
  Se3Field field(small_config(), store, rng);
  make_constant_field(store, Twist{Eigen::Vector3d(0.5, 0.3, -0.4), Eigen::Vector3d(1, 0, 2)});

  const Eigen::Vector3d p(0.3, 0.3, 0.3);
  for (auto [a, b, c] : {std::array<double, 3>{0.1, 0.5, 0.9}, {0.8, 0.4, 0.2}}) {
    const RigidTransform g_ab = field.integrate(store, p, a, b, 6);
    const RigidTransform g_bc = field.integrate(store, p, b, c, 6);
    const RigidTransform g_ac = field.integrate(store, p, a, c, 12);
    CHECK((compose(g_bc, g_ab).matrix() - g_ac.matrix()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("trapezoid integration converges at second order") {
  // smooth synthetic twist field, integrated against a dense reference
  const TwistField field = [](const Eigen::Vector3d& p, double t) {
    Twist xi;
    xi.omega = Eigen::Vector3d(0.8 * std::sin(2.1 * t + 0.3), 0.7 * std::cos(1.7 * t),
                               0.5 * std::sin(1.3 * t + 1.0));
    xi.v = Eigen::Vector3d(0.6 * std::cos(0.9 * t), 0.4 * std::sin(1.9 * t + 0.5),
                           0.5 * std::cos(2.3 * t + 0.2)) +
           0.1 * p;
    return xi;
  };
  const Eigen::Vector3d p(0.2, -0.4, 0.6);
  const double ti = 0.05, tk = 0.95;
  const RigidTransform ref =
      integrate_twist_field(field, p, ti, tk, 10000, Integrator::kExpOfIntegral);

  double prev_err = -1;
  for (int steps : {4, 8, 16, 32}) {
    const RigidTransform g =
        integrate_twist_field(field, p, ti, tk, steps, Integrator::kExpOfIntegral);
    const double err = (g.matrix() - ref.matrix()).norm();
    if (prev_err > 0) {
      const double ratio = prev_err / err;
      CHECK(ratio > 3.5);
      CHECK(ratio < 4.5);
    }
    prev_err = err;
  }
}

TEST_CASE("rotation part is always orthonormal") {
  Rng rng(13);
  ParamStore store;
  Se3Field field(small_config(), store, rng);
  Rng r2(77);
  for (const char* name : {"se3.omega.w2", "se3.omega.b2", "se3.v.w2", "se3.v.b2"}) {
    Eigen::MatrixXd& m = store.value(name);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = r2.normal();
  }
  for (int k = 0; k < 50; ++k) {
    const Eigen::Vector3d p(r2.uniform(-1, 1), r2.uniform(-1, 1), r2.uniform(-1, 1));
    const RigidTransform g = field.integrate(store, p, r2.uniform(), r2.uniform(), 3);
    CHECK((g.R * g.R.transpose() - Eigen::Matrix3d::Identity()).norm() < 1e-12);
  }
}

TEST_CASE("warp to canonical: reference frames and zero fields are identity") {
  Rng rng(17);
  ParamStore store;
  Se3Field field(small_config(), store, rng);
  const ReferenceSchedule sched = frames_schedule(16, 4);
  const double dt = 1.0 / 15.0;

  // query at a reference time: same point back
  const Eigen::Vector3d p(0.4, -0.3, 0.2);
  auto [p_ref, t_ref] = field.warp_to_canonical(store, sched, p, 8 * dt, 4);
  CHECK(p_ref == p);
  CHECK(t_ref == doctest::Approx(8 * dt));

  // zero-initialized field: identity warp from any query frame
  auto [p_q, t_q] = field.warp_to_canonical(store, sched, p, 5 * dt, 4);
  CHECK(p_q == p);
  CHECK(t_q == doctest::Approx(4 * dt));
}

TEST_CASE("warp reproduces analytic rigid motion for a matching constant field") {
  // For a body moving as pose(t) = exp(t xi), the transform carrying a world
  // point from its pose at t_i to its pose at t_k is exp((t_k - t_i) xi),
  // which is exactly what the integral of a constant twist field yields.
  Rng rng(43);
  ParamStore store;
  Se3Field field(small_config(), store, rng);
  const Twist xi{Eigen::Vector3d(0.3, -0.2, 1.1), Eigen::Vector3d(0.4, 0.1, -0.3)};
  make_constant_field(store, xi);

  std::vector<double> times(9);
  for (int f = 0; f < 9; ++f) times[f] = f / 8.0;
  const ReferenceSchedule sched = ReferenceSchedule::make(times, 4);

  for (int k = 0; k < 40; ++k) {
    const Eigen::Vector3d p0(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                             rng.uniform(-0.5, 0.5));
    const int frame = rng.uniform_int(9);
    const double t_i = times[frame];
    // world position of the body point at the query time
    const Eigen::Vector3d p_query = apply_point(exp_se3(scale_twist(t_i, xi)), p0);
    auto [warped, t_hat] = field.warp_to_canonical(store, sched, p_query, t_i, 4);
    // analytic canonical position at the reference time
    const Eigen::Vector3d expect = apply_point(exp_se3(scale_twist(t_hat, xi)), p0);
    CHECK((warped - expect).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("tape warp equals the plain batch warp in both integrator modes") {
  for (auto mode : {Integrator::kExpOfIntegral, Integrator::kProductOfExp}) {
    Rng rng(23);
    ParamStore store;
    Se3FieldConfig cfg = small_config();
    cfg.integrator = mode;
    Se3Field field(cfg, store, rng);
    Rng r2(5);
    for (const char* name : {"se3.omega.w2", "se3.omega.b2", "se3.v.w2", "se3.v.b2"}) {
      Eigen::MatrixXd& m = store.value(name);
      for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = 0.4 * r2.normal();
    }

    Eigen::MatrixXd pts(12, 3);
    for (Eigen::Index i = 0; i < pts.size(); ++i) pts(i) = r2.uniform(-0.9, 0.9);
    Eigen::MatrixXd plain;
    field.warp_batch(store, pts, 0.3, 0.55, 3, plain);

    ad::Tape tape(&store);
    const auto warped = field.warp_tape(tape, pts, 0.3, 0.55, 3);
    CHECK((tape.value(warped.x).col(0) - plain.col(0)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((tape.value(warped.y).col(0) - plain.col(1)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((tape.value(warped.z).col(0) - plain.col(2)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("ablation masks pin the complementary branch") {
  for (auto mode : {Ablation::kTranslationOnly, Ablation::kRotationOnly}) {
    Rng rng(29);
    ParamStore store;
    Se3FieldConfig cfg = small_config();
    cfg.ablation = mode;
    Se3Field field(cfg, store, rng);
    Rng r2(9);
    for (const char* name : {"se3.omega.w2", "se3.omega.b2", "se3.v.w2", "se3.v.b2"}) {
      Eigen::MatrixXd& m = store.value(name);
      for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = r2.normal();
    }
    for (int k = 0; k < 20; ++k) {
      const Eigen::Vector3d p(r2.uniform(-1, 1), r2.uniform(-1, 1), r2.uniform(-1, 1));
      const Twist xi = field.twist(store, p, r2.uniform());
      if (mode == Ablation::kTranslationOnly) {
        CHECK(xi.omega.norm() == 0.0);
        CHECK(xi.v.norm() > 0.0);
        const RigidTransform g = field.integrate(store, p, 0.1, 0.9, 4);
        CHECK((g.R - Eigen::Matrix3d::Identity()).norm() < 1e-12);
      } else {
        CHECK(xi.v.norm() == 0.0);
        CHECK(xi.omega.norm() > 0.0);
      }
    }
  }
}
