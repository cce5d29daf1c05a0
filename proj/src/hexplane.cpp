#include "lieflow/hexplane.hpp"

#include <cmath>

#include "lieflow/errors.hpp"

namespace lieflow {

namespace {

constexpr const char* kPlaneNames[6] = {
    "hexplane.plane_xy", "hexplane.plane_xz", "hexplane.plane_yz",
    "hexplane.plane_zt", "hexplane.plane_yt", "hexplane.plane_xt"};

// (u, v) source axes for each plane; 0..2 are x,y,z of the unit-box point,
// 3 is time. The fusion pairs are (xy,zt), (xz,yt), (yz,xt).
constexpr int kPlaneAxes[6][2] = {{0, 1}, {0, 2}, {1, 2}, {2, 3}, {1, 3}, {0, 3}};

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

Eigen::VectorXd bilerp(const Eigen::MatrixXd& plane, int res, double u, double v) {
  if (plane.rows() != static_cast<Eigen::Index>(res) * res) {
    throw ShapeMismatch("bilerp: plane rows != res^2");
  }
  const double uu = std::clamp(u, 0.0, 1.0);
  const double vv = std::clamp(v, 0.0, 1.0);
  const double x = uu * (res - 1);
  const double y = vv * (res - 1);
  const int i0 = std::min(static_cast<int>(std::floor(x)), res - 2);
  const int j0 = std::min(static_cast<int>(std::floor(y)), res - 2);
  const double fx = x - i0;
  const double fy = y - j0;
  return (1.0 - fx) * (1.0 - fy) * plane.row(i0 * res + j0).transpose() +
         fx * (1.0 - fy) * plane.row((i0 + 1) * res + j0).transpose() +
         (1.0 - fx) * fy * plane.row(i0 * res + j0 + 1).transpose() +
         fx * fy * plane.row((i0 + 1) * res + j0 + 1).transpose();
}

HexPlaneField::HexPlaneField(const HexPlaneConfig& cfg, ParamStore& store, Rng& rng) : cfg_(cfg) {
  cfg_.aabb.require_valid();
  for (const char* name : kPlaneNames) {
    Eigen::MatrixXd plane(cfg_.res * cfg_.res, cfg_.feat);
    for (Eigen::Index i = 0; i < plane.size(); ++i) {
      plane(i) = rng.uniform(-cfg_.init_scale, cfg_.init_scale);
    }
    store.add(name, std::move(plane));
  }
  const int fused = fused_width();
  const double bound = 1.0 / std::sqrt(static_cast<double>(fused));
  Eigen::MatrixXd dw(fused, 1), db(1, 1), aw(fused, cfg_.embed), ab(1, cfg_.embed);
  for (Eigen::Index i = 0; i < dw.size(); ++i) dw(i) = rng.uniform(-bound, bound);
  for (Eigen::Index i = 0; i < db.size(); ++i) db(i) = rng.uniform(-bound, bound);
  for (Eigen::Index i = 0; i < aw.size(); ++i) aw(i) = rng.uniform(-bound, bound);
  for (Eigen::Index i = 0; i < ab.size(); ++i) ab(i) = rng.uniform(-bound, bound);
  store.add("hexplane.density_w", std::move(dw));
  store.add("hexplane.density_b", std::move(db));
  store.add("hexplane.appearance_w", std::move(aw));
  store.add("hexplane.appearance_b", std::move(ab));
  rgb_head_ = Mlp::create(store, "hexplane.rgb",
                          {cfg_.embed + view_enc_width(), cfg_.rgb_hidden, 3}, rng);
}

HexPlaneField::HexPlaneField(const HexPlaneConfig& cfg, const ParamStore& store) : cfg_(cfg) {
  cfg_.aabb.require_valid();
  for (const char* name : kPlaneNames) (void)store.index(name);
  rgb_head_ = Mlp::bind(store, "hexplane.rgb",
                        {cfg_.embed + view_enc_width(), cfg_.rgb_hidden, 3});
}

Eigen::MatrixXd HexPlaneField::encode_dirs(const Eigen::MatrixXd& dirs) const {
  Eigen::MatrixXd out(dirs.rows(), view_enc_width());
  out.leftCols(3) = dirs;
  int c = 3;
  for (int k = 0; k < cfg_.view_freqs; ++k) {
    const double f = M_PI * std::pow(2.0, k);
    out.middleCols(c, 3) = (f * dirs).array().sin();
    out.middleCols(c + 3, 3) = (f * dirs).array().cos();
    c += 6;
  }
  return out;
}

Eigen::VectorXd HexPlaneField::encode(const ParamStore& store, const Eigen::Vector3d& p,
                                      double t) const {
  const Eigen::Vector3d u = cfg_.aabb.to_unit(p);
  const double coords[4] = {u.x(), u.y(), u.z(), t};
  std::array<Eigen::VectorXd, 6> feats;
  for (int k = 0; k < 6; ++k) {
    feats[k] = bilerp(store.value(kPlaneNames[k]), cfg_.res, coords[kPlaneAxes[k][0]],
                      coords[kPlaneAxes[k][1]]);
  }
  Eigen::VectorXd fused(fused_width());
  fused << feats[0].cwiseProduct(feats[3]), feats[1].cwiseProduct(feats[4]),
      feats[2].cwiseProduct(feats[5]);
  return fused;
}

FieldSample HexPlaneField::query(const ParamStore& store, const Eigen::Vector3d& p, double t,
                                 const Eigen::Vector3d& view_dir) const {
  Eigen::VectorXd sigma(1);
  Eigen::MatrixXd rgb(1, 3);
  query_batch(store, p.transpose(), t, view_dir.transpose(), sigma, rgb);
  return FieldSample{sigma(0), rgb.row(0).transpose()};
}

void HexPlaneField::query_batch(const ParamStore& store, const Eigen::MatrixXd& pts, double t,
                                const Eigen::MatrixXd& dirs, Eigen::VectorXd& sigma_out,
                                Eigen::MatrixXd& rgb_out) const {
  const Eigen::Index batch = pts.rows();
  if (dirs.rows() != batch) throw ShapeMismatch("query_batch: pts/dirs row mismatch");

  Eigen::MatrixXd fused(batch, fused_width());
  for (Eigen::Index i = 0; i < batch; ++i) {
    fused.row(i) = encode(store, pts.row(i).transpose(), t).transpose();
  }

  const Eigen::VectorXd raw_sigma =
      (fused * store.value("hexplane.density_w")).col(0).array() +
      store.value("hexplane.density_b")(0, 0);
  sigma_out = raw_sigma.unaryExpr([](double x) { return softplus(x); });

  const Eigen::MatrixXd embed =
      (fused * store.value("hexplane.appearance_w")).rowwise() +
      store.value("hexplane.appearance_b").row(0);
  Eigen::MatrixXd head_in(batch, cfg_.embed + view_enc_width());
  head_in << embed, encode_dirs(dirs);
  rgb_out = rgb_head_.forward(store, head_in).unaryExpr([](double x) { return sigmoid(x); });
}

HexPlaneField::TapeSample HexPlaneField::query_tape(ad::Tape& tape, ad::Var x, ad::Var y,
                                                    ad::Var z, double t,
                                                    const Eigen::MatrixXd& dirs) const {
  const Eigen::Index batch = tape.value(x).rows();
  const Eigen::Vector3d lo = cfg_.aabb.min;
  const Eigen::Vector3d inv = cfg_.aabb.extent().cwiseInverse();

  // unit-box coordinates; the gather clamps and zeroes gradients outside
  const ad::Var coords[4] = {
      tape.scale(tape.shift(x, -lo.x()), inv.x()),
      tape.scale(tape.shift(y, -lo.y()), inv.y()),
      tape.scale(tape.shift(z, -lo.z()), inv.z()),
      tape.constant(Eigen::MatrixXd::Constant(batch, 1, t)),
  };

  ad::Var feats[6];
  for (int k = 0; k < 6; ++k) {
    feats[k] = tape.gather(tape.param(kPlaneNames[k]), coords[kPlaneAxes[k][0]],
                           coords[kPlaneAxes[k][1]], cfg_.res);
  }
  const ad::Var fused = tape.hcat(tape.mul(feats[0], feats[3]), tape.mul(feats[1], feats[4]),
                                  tape.mul(feats[2], feats[5]));

  TapeSample out;
  out.sigma = tape.softplus(
      tape.add(tape.matmul(fused, tape.param("hexplane.density_w")),
               tape.param("hexplane.density_b")));

  const ad::Var embed = tape.add(tape.matmul(fused, tape.param("hexplane.appearance_w")),
                                 tape.param("hexplane.appearance_b"));
  const ad::Var head_in = tape.hcat(embed, tape.constant(encode_dirs(dirs)));
  out.rgb = tape.sigmoid(rgb_head_.forward(tape, head_in));
  return out;
}

}  // namespace lieflow
