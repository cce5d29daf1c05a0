#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lieflow/hexplane.hpp"
#include "lieflow/rng.hpp"

using namespace lieflow;

namespace {

HexPlaneConfig small_config() {
  HexPlaneConfig cfg;
  cfg.res = 8;
  cfg.feat = 4;
  cfg.embed = 5;
  cfg.rgb_hidden = 8;
  cfg.view_freqs = 2;
  cfg.aabb.min = Eigen::Vector3d(-1, -1, -1);
  cfg.aabb.max = Eigen::Vector3d(1, 1, 1);
  return cfg;
}

// explicit four-corner weighted sum, written independently of bilerp
Eigen::VectorXd bilerp_oracle(const Eigen::MatrixXd& plane, int res, double u, double v) {
  const double x = std::clamp(u, 0.0, 1.0) * (res - 1);
  const double y = std::clamp(v, 0.0, 1.0) * (res - 1);
  int i = std::min(static_cast<int>(x), res - 2);
  int j = std::min(static_cast<int>(y), res - 2);
  const double fx = x - i, fy = y - j;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(plane.cols());
  const double w[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
  const int rows[4] = {i * res + j, (i + 1) * res + j, i * res + j + 1, (i + 1) * res + j + 1};
  for (int k = 0; k < 4; ++k) out += w[k] * plane.row(rows[k]).transpose();
  return out;
}

}  // namespace

TEST_CASE("bilerp: texel exactness, midpoint mean, random oracle") {
  Rng rng(3);
  const int res = 6;
  Eigen::MatrixXd plane(res * res, 3);
  for (Eigen::Index i = 0; i < plane.size(); ++i) plane(i) = rng.normal();

  // exactly at a texel
  const int ti = 2, tj = 4;
  const Eigen::VectorXd at = bilerp(plane, res, ti / (res - 1.0), tj / (res - 1.0));
  CHECK((at - plane.row(ti * res + tj).transpose()).cwiseAbs().maxCoeff() < 1e-15);

  // midpoint of four texels is their mean
  const Eigen::VectorXd mid = bilerp(plane, res, 2.5 / (res - 1), 3.5 / (res - 1));
  const Eigen::VectorXd mean = 0.25 * (plane.row(2 * res + 3) + plane.row(3 * res + 3) +
                                       plane.row(2 * res + 4) + plane.row(3 * res + 4))
                                          .transpose();
  CHECK((mid - mean).cwiseAbs().maxCoeff() < 1e-15);

  for (int k = 0; k < 200; ++k) {
    const double u = rng.uniform(-0.2, 1.2);  // includes clamped region
    const double v = rng.uniform(-0.2, 1.2);
    CHECK((bilerp(plane, res, u, v) - bilerp_oracle(plane, res, u, v)).cwiseAbs().maxCoeff() <
          1e-15);
  }
}

TEST_CASE("encode: multiplicative plane fusion") {
  Rng rng(5);
  ParamStore store;
  HexPlaneField field(small_config(), store, rng);
  const int feat = small_config().feat;

  // all planes one -> fused vector of ones
  for (const char* name : {"hexplane.plane_xy", "hexplane.plane_xz", "hexplane.plane_yz",
                           "hexplane.plane_zt", "hexplane.plane_yt", "hexplane.plane_xt"}) {
    store.value(name).setOnes();
  }
  const Eigen::VectorXd ones = field.encode(store, Eigen::Vector3d(0.1, -0.4, 0.7), 0.3);
  CHECK(ones.size() == 3 * feat);
  CHECK((ones.array() - 1.0).abs().maxCoeff() < 1e-15);

  // zeroing the xy plane kills the first product block only
  store.value("hexplane.plane_xy").setZero();
  const Eigen::VectorXd gated = field.encode(store, Eigen::Vector3d(0.1, -0.4, 0.7), 0.3);
  CHECK(gated.head(feat).cwiseAbs().maxCoeff() == 0.0);
  CHECK(gated.tail(2 * feat).cwiseAbs().maxCoeff() == 1.0);

  // random planes against a straight-line reimplementation
  Rng rng2(7);
  ParamStore store2;
  HexPlaneField field2(small_config(), store2, rng2);
  const int res = small_config().res;
  for (int k = 0; k < 50; ++k) {
    const Eigen::Vector3d p(rng2.uniform(-1, 1), rng2.uniform(-1, 1), rng2.uniform(-1, 1));
    const double t = rng2.uniform();
    const Eigen::Vector3d u = small_config().aabb.to_unit(p);
    Eigen::VectorXd expect(3 * small_config().feat);
    expect << bilerp_oracle(store2.value("hexplane.plane_xy"), res, u.x(), u.y())
                  .cwiseProduct(bilerp_oracle(store2.value("hexplane.plane_zt"), res, u.z(), t)),
        bilerp_oracle(store2.value("hexplane.plane_xz"), res, u.x(), u.z())
            .cwiseProduct(bilerp_oracle(store2.value("hexplane.plane_yt"), res, u.y(), t)),
        bilerp_oracle(store2.value("hexplane.plane_yz"), res, u.y(), u.z())
            .cwiseProduct(bilerp_oracle(store2.value("hexplane.plane_xt"), res, u.x(), t));
    CHECK((field2.encode(store2, p, t) - expect).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("query: activation closed forms and output ranges") {
  Rng rng(11);
  ParamStore store;
  HexPlaneField field(small_config(), store, rng);
  const Eigen::Vector3d dir = Eigen::Vector3d(0.3, -0.5, 0.8).normalized();

  // zero density head -> sigma = softplus(0) = ln 2
  store.value("hexplane.density_w").setZero();
  store.value("hexplane.density_b").setZero();
  FieldSample s = field.query(store, Eigen::Vector3d(0.2, 0.2, 0.2), 0.5, dir);
  CHECK(s.sigma == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // zero rgb logits -> mid gray
  store.value("hexplane.rgb.w1").setZero();
  store.value("hexplane.rgb.b1").setZero();
  s = field.query(store, Eigen::Vector3d(0.2, 0.2, 0.2), 0.5, dir);
  CHECK((s.rgb - Eigen::Vector3d::Constant(0.5)).cwiseAbs().maxCoeff() < 1e-15);

  // fresh random field: ranges hold everywhere, including outside the box
  Rng rng2(13);
  ParamStore store2;
  HexPlaneField field2(small_config(), store2, rng2);
  for (int k = 0; k < 200; ++k) {
    const Eigen::Vector3d p(rng2.uniform(-2, 2), rng2.uniform(-2, 2), rng2.uniform(-2, 2));
    const FieldSample q = field2.query(store2, p, rng2.uniform(), dir);
    CHECK(q.sigma >= 0.0);
    CHECK(q.rgb.minCoeff() >= 0.0);
    CHECK(q.rgb.maxCoeff() <= 1.0);
  }
}

TEST_CASE("locality: a texel only influences queries whose footprint covers it") {
  Rng rng(17);
  ParamStore store;
  const HexPlaneConfig cfg = small_config();
  HexPlaneField field(cfg, store, rng);
  const Eigen::Vector3d dir(0, 0, 1);

  // probe grid before and after perturbing one texel of the xy plane
  const int pi = 3, pj = 2;
  std::vector<Eigen::Vector3d> probes;
  std::vector<double> before;
  for (double x = -0.95; x <= 0.96; x += 0.27) {
    for (double y = -0.95; y <= 0.96; y += 0.27) {
      probes.emplace_back(x, y, 0.0);
      before.push_back(field.query(store, probes.back(), 0.5, dir).sigma);
    }
  }
  store.value("hexplane.plane_xy")(pi * cfg.res + pj, 1) += 0.5;
  for (std::size_t k = 0; k < probes.size(); ++k) {
    const double after = field.query(store, probes[k], 0.5, dir).sigma;
    const Eigen::Vector3d u = cfg.aabb.to_unit(probes[k]);
    const double x = u.x() * (cfg.res - 1), y = u.y() * (cfg.res - 1);
    const int i0 = std::min(static_cast<int>(x), cfg.res - 2);
    const int j0 = std::min(static_cast<int>(y), cfg.res - 2);
    const bool covered = (pi == i0 || pi == i0 + 1) && (pj == j0 || pj == j0 + 1) &&
                         std::abs(x - pi) < 1.0 + 1e-12 && std::abs(y - pj) < 1.0 + 1e-12;
    if (!covered) {
      CHECK(after == before[k]);
    }
  }
}

TEST_CASE("unusable bounds are rejected") {
  Rng rng(3);
  ParamStore store;
  HexPlaneConfig cfg = small_config();
  cfg.aabb.max = Eigen::Vector3d(std::nan(""), 1, 1);
  CHECK_THROWS_AS(HexPlaneField(cfg, store, rng), PointOutsideAabb);
}

TEST_CASE("encode is continuous at small steps") {
  Rng rng(19);
  ParamStore store;
  HexPlaneField field(small_config(), store, rng);
  const Eigen::Vector3d p(0.123, -0.456, 0.789);
  const double t = 0.321;
  const Eigen::VectorXd base = field.encode(store, p, t);
  for (int axis = 0; axis < 3; ++axis) {
    Eigen::Vector3d q = p;
    q[axis] += 1e-6;
    CHECK((field.encode(store, q, t) - base).cwiseAbs().maxCoeff() < 1e-5);
  }
  CHECK((field.encode(store, p, t + 1e-6) - base).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("tape query equals the plain path") {
  Rng rng(23);
  ParamStore store;
  HexPlaneField field(small_config(), store, rng);

  Eigen::MatrixXd pts(10, 3), dirs(10, 3);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts(i) = rng.uniform(-1, 1);
  for (int i = 0; i < 10; ++i) {
    dirs.row(i) = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal())
                      .normalized()
                      .transpose();
  }
  Eigen::VectorXd sigma;
  Eigen::MatrixXd rgb;
  field.query_batch(store, pts, 0.42, dirs, sigma, rgb);

  ad::Tape tape(&store);
  const auto sample = field.query_tape(tape, tape.constant(pts.col(0)), tape.constant(pts.col(1)),
                                       tape.constant(pts.col(2)), 0.42, dirs);
  CHECK((tape.value(sample.sigma).col(0) - sigma).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((tape.value(sample.rgb) - rgb).cwiseAbs().maxCoeff() < 1e-13);
}
