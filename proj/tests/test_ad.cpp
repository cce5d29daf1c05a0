#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "lieflow/adam.hpp"
#include "lieflow/mlp.hpp"
#include "lieflow/param_store.hpp"
#include "lieflow/rng.hpp"
#include "lieflow/tape.hpp"

using namespace lieflow;
using ad::Tape;
using ad::Var;

namespace {

// Central finite differences over every scalar in the store; returns the
// worst mismatch against the recorded analytic gradients.
double max_grad_mismatch(ParamStore& store, const std::function<Var(Tape&)>& f,
                         double step = 1e-5) {
  const double dummy = ad::value_and_grad(store, f);
  (void)dummy;
  std::vector<Eigen::MatrixXd> analytic;
  for (int i = 0; i < store.size(); ++i) analytic.push_back(store.grad(i));

  double worst = 0.0;
  for (int i = 0; i < store.size(); ++i) {
    Eigen::MatrixXd& val = store.value(i);
    for (Eigen::Index k = 0; k < val.size(); ++k) {
      const double saved = val(k);
      val(k) = saved + step;
      Tape tp(&store);
      const double up = tp.scalar_value(f(tp));
      val(k) = saved - step;
      Tape tm(&store);
      const double dn = tm.scalar_value(f(tm));
      val(k) = saved;
      const double fd = (up - dn) / (2.0 * step);
      const double a = analytic[i](k);
      const double denom = std::max({std::abs(a), std::abs(fd), 1e-3});
      worst = std::max(worst, std::abs(a - fd) / denom);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("polynomial and trig scalar gradients") {
  ParamStore store;
  store.add("x", Eigen::MatrixXd::Constant(1, 1, 3.0));

  const double val = ad::value_and_grad(store, [](Tape& t) {
    const Var x = t.param("x");
    return t.mul(x, x);
  });
  CHECK(val == doctest::Approx(9.0));
  CHECK(store.grad("x")(0, 0) == doctest::Approx(6.0));

  store.value("x")(0, 0) = 0.0;
  const double sv = ad::value_and_grad(store, [](Tape& t) { return t.sin(t.param("x")); });
  CHECK(sv == 0.0);
  CHECK(store.grad("x")(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("elementwise broadcasting forward and backward") {
  ParamStore store;
  store.add("col", Eigen::MatrixXd::Constant(4, 1, 2.0));
  store.add("mat", Eigen::MatrixXd::Constant(4, 3, 1.5));
  store.add("row", Eigen::MatrixXd::Constant(1, 3, -0.5));

  auto f = [](Tape& t) {
    Var prod = t.mul(t.param("mat"), t.param("col"));  // column broadcast
    prod = t.add(prod, t.param("row"));                // row broadcast
    return t.sum(t.mul(prod, prod));
  };
  CHECK(max_grad_mismatch(store, f) < 1e-6);
}

TEST_CASE("matmul relu softplus sigmoid chain matches finite differences") {
  Rng rng(5);
  ParamStore store;
  Eigen::MatrixXd a(2, 3), b(3, 2);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = rng.normal();
  for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.normal();
  store.add("a", a);
  store.add("b", b);

  auto f = [](Tape& t) {
    Var h = t.matmul(t.param("a"), t.param("b"));
    h = t.add(t.relu(h), t.sigmoid(h));
    h = t.softplus(h);
    return t.mean(h);
  };
  CHECK(max_grad_mismatch(store, f) < 1e-6);
}

TEST_CASE("rotation coefficient primitives: values, derivatives, branch seam") {
  // values against direct evaluation
  auto ref_a = [](double x) { return std::sin(std::sqrt(x)) / std::sqrt(x); };
  auto ref_b = [](double x) { return (1.0 - std::cos(std::sqrt(x))) / x; };
  auto ref_c = [](double x) { return (std::sqrt(x) - std::sin(std::sqrt(x))) / std::pow(x, 1.5); };

  ParamStore store;
  store.add("x", Eigen::MatrixXd::Constant(1, 1, 0.7));
  for (double x0 : {2.3, 0.3, 1.2e-2, 0.98e-2, 1e-3, 1e-6}) {
    store.value("x")(0, 0) = x0;
    Tape t(&store);
    CHECK(t.scalar_value(t.rot_coeff_a(t.param("x"))) == doctest::Approx(ref_a(x0)).epsilon(1e-8));
    CHECK(t.scalar_value(t.rot_coeff_b(t.param("x"))) == doctest::Approx(ref_b(x0)).epsilon(1e-8));
    CHECK(t.scalar_value(t.rot_coeff_c(t.param("x"))) == doctest::Approx(ref_c(x0)).epsilon(1e-8));

    for (auto which : {0, 1, 2}) {
      auto f = [which](Tape& tp) {
        const Var x = tp.param("x");
        if (which == 0) return tp.rot_coeff_a(x);
        if (which == 1) return tp.rot_coeff_b(x);
        return tp.rot_coeff_c(x);
      };
      CHECK(max_grad_mismatch(store, f, std::max(1e-6, x0 * 1e-2)) < 1e-5);
    }
  }
}

TEST_CASE("gather gradient w.r.t. plane and coordinates") {
  Rng rng(9);
  const int res = 5;
  ParamStore store;
  Eigen::MatrixXd plane(res * res, 3);
  for (Eigen::Index i = 0; i < plane.size(); ++i) plane(i) = rng.normal();
  store.add("plane", plane);
  Eigen::MatrixXd uv(6, 2);
  for (Eigen::Index i = 0; i < uv.size(); ++i) uv(i) = 0.07 + 0.85 * rng.uniform();
  store.add("uv", uv);

  auto f = [res](Tape& t) {
    const Var uv_p = t.param("uv");
    const Var feats = t.gather(t.param("plane"), t.col(uv_p, 0), t.col(uv_p, 1), res);
    return t.sum(t.mul(feats, feats));
  };
  CHECK(max_grad_mismatch(store, f, 1e-6) < 1e-5);
}

TEST_CASE("segment ops") {
  ParamStore store;
  Eigen::MatrixXd x(6, 1);
  x << 1, 2, 3, 4, 5, 6;
  store.add("x", x);

  Tape t(&store);
  const Var cum = t.seg_cumsum_exclusive(t.param("x"), 3);
  Eigen::MatrixXd expect(6, 1);
  expect << 0, 1, 3, 0, 4, 9;
  CHECK((t.value(cum) - expect).norm() == 0.0);

  const Var ss = t.seg_sum(t.param("x"), 3);
  Eigen::MatrixXd expect2(2, 1);
  expect2 << 6, 15;
  CHECK((t.value(ss) - expect2).norm() == 0.0);

  auto f = [](Tape& tp) {
    const Var c = tp.seg_cumsum_exclusive(tp.param("x"), 3);
    const Var s = tp.seg_sum(tp.mul(c, c), 3);
    return tp.mean(tp.mul(s, s));
  };
  CHECK(max_grad_mismatch(store, f) < 1e-6);
}

TEST_CASE("unsupported primitive is rejected at build time") {
  ParamStore store;
  store.add("x", Eigen::MatrixXd::Constant(1, 1, 1.0));
  Tape t(&store);
  const Var x = t.param("x");
  CHECK_THROWS_AS(t.unary(ad::Op::kMatMul, x), UnsupportedPrimitive);
  CHECK_THROWS_AS(t.binary(ad::Op::kSin, x, x), UnsupportedPrimitive);
}

TEST_CASE("backward is linear: grad(f+g) == grad(f) + grad(g)") {
  Rng rng(23);
  ParamStore store;
  Eigen::MatrixXd w(4, 4);
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.normal();
  store.add("w", w);

  auto f = [](Tape& t) { return t.sum(t.sin(t.param("w"))); };
  auto g = [](Tape& t) { return t.mean(t.mul(t.param("w"), t.param("w"))); };
  auto fg = [&](Tape& t) { return t.add(f(t), g(t)); };

  ad::value_and_grad(store, f);
  const Eigen::MatrixXd gf = store.grad("w");
  ad::value_and_grad(store, g);
  const Eigen::MatrixXd gg = store.grad("w");
  ad::value_and_grad(store, fg);
  CHECK((store.grad("w") - (gf + gg)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("mlp forward: zero weights, identity layer, determinism, gradients") {
  Rng rng(1);
  ParamStore zero_store;
  Mlp zero_mlp = Mlp::create(zero_store, "z", {3, 4}, rng, /*zero_init_last=*/true);
  CHECK(zero_mlp.forward(zero_store, Eigen::MatrixXd::Random(5, 3)).cwiseAbs().maxCoeff() == 0.0);

  ParamStore id_store;
  Rng rng2(2);
  Mlp id_mlp = Mlp::create(id_store, "i", {3, 3}, rng2);
  id_store.value("i.w0") = Eigen::MatrixXd::Identity(3, 3);
  id_store.value("i.b0").setZero();
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 3);
  CHECK((id_mlp.forward(id_store, x) - x).cwiseAbs().maxCoeff() == 0.0);

  // fixed seed twice -> bit identical outputs
  ParamStore s1, s2;
  Rng ra(77), rb(77);
  Mlp m1 = Mlp::create(s1, "m", {8, 128, 128, 128, 4}, ra);
  Mlp m2 = Mlp::create(s2, "m", {8, 128, 128, 128, 4}, rb);
  Eigen::MatrixXd probe(3, 8);
  Rng rp(123);
  for (Eigen::Index i = 0; i < probe.size(); ++i) probe(i) = rp.normal();
  const Eigen::MatrixXd o1 = m1.forward(s1, probe);
  const Eigen::MatrixXd o2 = m2.forward(s2, probe);
  CHECK((o1 - o2).cwiseAbs().maxCoeff() == 0.0);

  // tape path equals plain path, gradients match finite differences
  ParamStore gs;
  Rng rg(31);
  Mlp gm = Mlp::create(gs, "g", {5, 16, 16, 2}, rg);
  Eigen::MatrixXd gin(7, 5);
  for (Eigen::Index i = 0; i < gin.size(); ++i) gin(i) = rg.normal();
  Tape tape(&gs);
  const Var out = gm.forward(tape, tape.constant(gin));
  CHECK((tape.value(out) - gm.forward(gs, gin)).cwiseAbs().maxCoeff() < 1e-14);

  auto f = [&](Tape& t) {
    const Var o = gm.forward(t, t.constant(gin));
    return t.mean(t.mul(o, o));
  };
  CHECK(max_grad_mismatch(gs, f) < 1e-6);

  CHECK_THROWS_AS(gm.forward(gs, Eigen::MatrixXd::Random(2, 4)), ShapeMismatch);
}

TEST_CASE("adam: zero grad no-op, first step sign, quadratic bowl") {
  ParamStore store;
  store.add("p", Eigen::MatrixXd::Constant(2, 2, 1.25));
  const std::vector<int> group = {0};
  AdamState state;
  AdamConfig cfg;
  cfg.lr = 1e-2;

  store.zero_grad();
  adam_step(store, group, state, cfg);
  CHECK((store.value("p").array() == 1.25).all());

  // constant gradient from fresh state: step is -lr * g/(|g| + eps) ~ -lr*sign(g)
  AdamState s2;
  store.grad("p").setConstant(0.7);
  adam_step(store, group, s2, cfg);
  CHECK((store.value("p").array() - (1.25 - cfg.lr * 0.7 / (0.7 + cfg.eps))).abs().maxCoeff() <
        1e-12);

  // quadratic bowl converges
  ParamStore bowl;
  Eigen::MatrixXd x0(3, 1);
  x0 << 2.0, -1.5, 0.7;
  bowl.add("x", x0);
  AdamState s3;
  for (int it = 0; it < 2000; ++it) {
    ad::value_and_grad(bowl, [](Tape& t) {
      const Var x = t.param("x");
      return t.sum(t.mul(x, x));
    });
    adam_step(bowl, {0}, s3, cfg);
  }
  CHECK(bowl.value("x").norm() < 1e-3);
}

TEST_CASE("identical seeds give identical 100-step loss sequences") {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    ParamStore store;
    Mlp mlp = Mlp::create(store, "n", {4, 16, 1}, rng);
    AdamState st;
    AdamConfig cfg;
    std::vector<double> losses;
    for (int it = 0; it < 100; ++it) {
      Eigen::MatrixXd batch(8, 4);
      for (Eigen::Index i = 0; i < batch.size(); ++i) batch(i) = rng.normal();
      const double loss = ad::value_and_grad(store, [&](Tape& t) {
        const Var o = mlp.forward(t, t.constant(batch));
        return t.mean(t.mul(o, o));
      });
      adam_step(store, {0, 1, 2, 3}, st, cfg);
      losses.push_back(loss);
    }
    return losses;
  };
  const auto a = run(99);
  const auto b = run(99);
  CHECK(a == b);
}
