#include "lieflow/tape.hpp"

#include <cmath>

namespace lieflow::ad {

namespace {

double softplus_scalar(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid_scalar(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Rodrigues coefficients and their derivatives as functions of x = theta^2.
// Taylor branches take over where the closed forms cancel catastrophically;
// with the cut at theta = 0.1 both sides agree to ~1e-13 at the seam.
constexpr double kCoeffTaylorCut = 1e-2;

double rot_a(double x) {
  if (x < kCoeffTaylorCut) {
    return 1.0 + x * (-1.0 / 6.0 + x * (1.0 / 120.0 + x * (-1.0 / 5040.0 + x / 362880.0)));
  }
  const double s = std::sqrt(x);
  return std::sin(s) / s;
}

double rot_a_dx(double x) {
  if (x < kCoeffTaylorCut) {
    return -1.0 / 6.0 + x * (1.0 / 60.0 + x * (-1.0 / 1680.0 + x / 90720.0));
  }
  const double s = std::sqrt(x);
  return (s * std::cos(s) - std::sin(s)) / (2.0 * s * s * s);
}

double rot_b(double x) {
  if (x < kCoeffTaylorCut) {
    return 0.5 + x * (-1.0 / 24.0 + x * (1.0 / 720.0 + x * (-1.0 / 40320.0 + x / 3628800.0)));
  }
  return (1.0 - std::cos(std::sqrt(x))) / x;
}

double rot_b_dx(double x) {
  if (x < kCoeffTaylorCut) {
    return -1.0 / 24.0 + x * (1.0 / 360.0 + x * (-1.0 / 13440.0 + x / 907200.0));
  }
  const double s = std::sqrt(x);
  return (s * std::sin(s) / 2.0 - (1.0 - std::cos(s))) / (x * x);
}

double rot_c(double x) {
  if (x < kCoeffTaylorCut) {
    return 1.0 / 6.0 +
           x * (-1.0 / 120.0 + x * (1.0 / 5040.0 + x * (-1.0 / 362880.0 + x / 39916800.0)));
  }
  const double s = std::sqrt(x);
  return (s - std::sin(s)) / (x * s);
}

double rot_c_dx(double x) {
  if (x < kCoeffTaylorCut) {
    return -1.0 / 120.0 + x * (1.0 / 2520.0 + x * (-1.0 / 120960.0 + x / 9979200.0));
  }
  const double s = std::sqrt(x);
  return ((1.0 - std::cos(s)) * s - 3.0 * (s - std::sin(s))) / (2.0 * x * x * s);
}

bool elementwise_unary(Op op) {
  switch (op) {
    case Op::kNeg:
    case Op::kSin:
    case Op::kCos:
    case Op::kExp:
    case Op::kSqrt:
    case Op::kAbs:
    case Op::kRelu:
    case Op::kSoftplus:
    case Op::kSigmoid:
    case Op::kRotA:
    case Op::kRotB:
    case Op::kRotC:
      return true;
    default:
      return false;
  }
}

bool elementwise_binary(Op op) {
  switch (op) {
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kDiv:
      return true;
    default:
      return false;
  }
}

// Bilinear sample support: clamped texel footprint for one coordinate.
struct LerpAxis {
  int lo;       // low texel index
  double frac;  // blend weight toward lo+1
  double dcoord;  // d frac / d coord (0 when clamped outside [0,1])
};

LerpAxis lerp_axis(double coord, int res) {
  LerpAxis ax;
  double c = coord;
  bool clamped = false;
  if (c < 0.0) {
    c = 0.0;
    clamped = true;
  } else if (c > 1.0) {
    c = 1.0;
    clamped = true;
  }
  const double x = c * (res - 1);
  int lo = static_cast<int>(std::floor(x));
  if (lo > res - 2) lo = res - 2;
  ax.lo = lo;
  ax.frac = x - lo;
  ax.dcoord = clamped ? 0.0 : static_cast<double>(res - 1);
  return ax;
}

}  // namespace

Var Tape::constant(Mat m) {
  Node n;
  n.op = Op::kConst;
  n.value = std::move(m);
  return push(std::move(n));
}

Var Tape::param(const std::string& name) {
  if (!store_) throw std::logic_error("Tape: no ParamStore bound");
  return param(store_->index(name));
}

Var Tape::param(int store_index) {
  if (!store_) throw std::logic_error("Tape: no ParamStore bound");
  Node n;
  n.op = Op::kParam;
  n.store_index = store_index;
  n.value = store_->value(store_index);
  return push(std::move(n));
}

void Tape::broadcast_shape(const Mat& a, const Mat& b, Eigen::Index& r, Eigen::Index& c) {
  auto merge = [](Eigen::Index x, Eigen::Index y) -> Eigen::Index {
    if (x == y) return x;
    if (x == 1) return y;
    if (y == 1) return x;
    throw ShapeMismatch("tape: incompatible elementwise shapes");
  };
  r = merge(a.rows(), b.rows());
  c = merge(a.cols(), b.cols());
}

Mat Tape::broadcast_to(const Mat& m, Eigen::Index r, Eigen::Index c) {
  if (m.rows() == r && m.cols() == c) return m;
  if (m.rows() == 1 && m.cols() == 1) return Mat::Constant(r, c, m(0, 0));
  if (m.rows() == r && m.cols() == 1) return m.replicate(1, c);
  if (m.rows() == 1 && m.cols() == c) return m.replicate(r, 1);
  throw ShapeMismatch("tape: cannot broadcast operand");
}

Mat Tape::reduce_to(const Mat& g, Eigen::Index r, Eigen::Index c) {
  if (g.rows() == r && g.cols() == c) return g;
  if (r == 1 && c == 1) return Mat::Constant(1, 1, g.sum());
  if (r == g.rows() && c == 1) return g.rowwise().sum();
  if (r == 1 && c == g.cols()) return g.colwise().sum();
  throw ShapeMismatch("tape: cannot reduce adjoint");
}

Var Tape::unary(Op op, Var a) {
  if (!elementwise_unary(op)) {
    throw UnsupportedPrimitive("tape: op is not an elementwise unary primitive");
  }
  const Mat& x = nodes_.at(a.id).value;
  Node n;
  n.op = op;
  n.a = a.id;
  switch (op) {
    case Op::kNeg: n.value = -x; break;
    case Op::kSin: n.value = x.array().sin(); break;
    case Op::kCos: n.value = x.array().cos(); break;
    case Op::kExp: n.value = x.array().exp(); break;
    case Op::kSqrt: n.value = x.array().sqrt(); break;
    case Op::kAbs: n.value = x.array().abs(); break;
    case Op::kRelu: n.value = x.array().max(0.0); break;
    case Op::kSoftplus: n.value = x.unaryExpr(&softplus_scalar); break;
    case Op::kSigmoid: n.value = x.unaryExpr(&sigmoid_scalar); break;
    case Op::kRotA: n.value = x.unaryExpr(&rot_a); break;
    case Op::kRotB: n.value = x.unaryExpr(&rot_b); break;
    case Op::kRotC: n.value = x.unaryExpr(&rot_c); break;
    default: break;
  }
  return push(std::move(n));
}

Var Tape::binary(Op op, Var a, Var b) {
  if (!elementwise_binary(op)) {
    throw UnsupportedPrimitive("tape: op is not an elementwise binary primitive");
  }
  const Mat& x = nodes_.at(a.id).value;
  const Mat& y = nodes_.at(b.id).value;
  Eigen::Index r, c;
  broadcast_shape(x, y, r, c);
  const Mat xb = broadcast_to(x, r, c);
  const Mat yb = broadcast_to(y, r, c);
  Node n;
  n.op = op;
  n.a = a.id;
  n.b = b.id;
  switch (op) {
    case Op::kAdd: n.value = xb + yb; break;
    case Op::kSub: n.value = xb - yb; break;
    case Op::kMul: n.value = xb.cwiseProduct(yb); break;
    case Op::kDiv: n.value = xb.cwiseQuotient(yb); break;
    default: break;
  }
  return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
  Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.s0 = s;
  n.value = s * nodes_.at(a.id).value;
  return push(std::move(n));
}

Var Tape::shift(Var a, double s) {
  Node n;
  n.op = Op::kShift;
  n.a = a.id;
  n.s0 = s;
  n.value = nodes_.at(a.id).value.array() + s;
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const Mat& x = nodes_.at(a.id).value;
  const Mat& y = nodes_.at(b.id).value;
  if (x.cols() != y.rows()) {
    throw ShapeMismatch("tape: matmul inner dimensions disagree");
  }
  Node n;
  n.op = Op::kMatMul;
  n.a = a.id;
  n.b = b.id;
  n.value = x * y;
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::kSum;
  n.a = a.id;
  n.value = Mat::Constant(1, 1, nodes_.at(a.id).value.sum());
  return push(std::move(n));
}

Var Tape::mean(Var a) {
  const Mat& x = nodes_.at(a.id).value;
  Node n;
  n.op = Op::kMean;
  n.a = a.id;
  n.value = Mat::Constant(1, 1, x.sum() / static_cast<double>(x.size()));
  return push(std::move(n));
}

Var Tape::row_sum(Var a) {
  Node n;
  n.op = Op::kRowSum;
  n.a = a.id;
  n.value = nodes_.at(a.id).value.rowwise().sum();
  return push(std::move(n));
}

Var Tape::col(Var a, int j) {
  const Mat& x = nodes_.at(a.id).value;
  if (j < 0 || j >= x.cols()) throw ShapeMismatch("tape: column index out of range");
  Node n;
  n.op = Op::kCol;
  n.a = a.id;
  n.i0 = j;
  n.value = x.col(j);
  return push(std::move(n));
}

Var Tape::hcat(Var a, Var b) {
  const Mat& x = nodes_.at(a.id).value;
  const Mat& y = nodes_.at(b.id).value;
  if (x.rows() != y.rows()) throw ShapeMismatch("tape: hcat row counts disagree");
  Node n;
  n.op = Op::kHCat;
  n.a = a.id;
  n.b = b.id;
  n.i0 = static_cast<int>(x.cols());
  n.value.resize(x.rows(), x.cols() + y.cols());
  n.value << x, y;
  return push(std::move(n));
}

Var Tape::gather(Var plane, Var u, Var v, int res) {
  const Mat& p = nodes_.at(plane.id).value;
  const Mat& uu = nodes_.at(u.id).value;
  const Mat& vv = nodes_.at(v.id).value;
  if (p.rows() != static_cast<Eigen::Index>(res) * res) {
    throw ShapeMismatch("tape: plane rows != res^2");
  }
  if (uu.cols() != 1 || vv.cols() != 1 || uu.rows() != vv.rows()) {
    throw ShapeMismatch("tape: gather coordinates must be matching column vectors");
  }
  const Eigen::Index batch = uu.rows();
  Node n;
  n.op = Op::kGather;
  n.a = plane.id;
  n.b = u.id;
  n.c = v.id;
  n.i0 = res;
  n.value.resize(batch, p.cols());
  for (Eigen::Index i = 0; i < batch; ++i) {
    const LerpAxis au = lerp_axis(uu(i, 0), res);
    const LerpAxis av = lerp_axis(vv(i, 0), res);
    const auto r00 = p.row(au.lo * res + av.lo);
    const auto r10 = p.row((au.lo + 1) * res + av.lo);
    const auto r01 = p.row(au.lo * res + av.lo + 1);
    const auto r11 = p.row((au.lo + 1) * res + av.lo + 1);
    n.value.row(i) = (1.0 - au.frac) * (1.0 - av.frac) * r00 + au.frac * (1.0 - av.frac) * r10 +
                     (1.0 - au.frac) * av.frac * r01 + au.frac * av.frac * r11;
  }
  return push(std::move(n));
}

Var Tape::seg_cumsum_exclusive(Var a, int group) {
  const Mat& x = nodes_.at(a.id).value;
  if (group <= 0 || x.rows() % group != 0) {
    throw ShapeMismatch("tape: segment size must divide row count");
  }
  Node n;
  n.op = Op::kSegCumsum;
  n.a = a.id;
  n.i0 = group;
  n.value.resize(x.rows(), x.cols());
  for (Eigen::Index start = 0; start < x.rows(); start += group) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(x.cols());
    for (int k = 0; k < group; ++k) {
      n.value.row(start + k) = acc;
      acc += x.row(start + k);
    }
  }
  return push(std::move(n));
}

Var Tape::seg_sum(Var a, int group) {
  const Mat& x = nodes_.at(a.id).value;
  if (group <= 0 || x.rows() % group != 0) {
    throw ShapeMismatch("tape: segment size must divide row count");
  }
  Node n;
  n.op = Op::kSegSum;
  n.a = a.id;
  n.i0 = group;
  n.value.resize(x.rows() / group, x.cols());
  for (Eigen::Index s = 0; s < n.value.rows(); ++s) {
    n.value.row(s) = x.middleRows(s * group, group).colwise().sum();
  }
  return push(std::move(n));
}

double Tape::scalar_value(Var v) const {
  const Mat& m = nodes_.at(v.id).value;
  if (m.rows() != 1 || m.cols() != 1) throw ShapeMismatch("tape: node is not scalar");
  return m(0, 0);
}

void Tape::backward(Var loss) {
  const Mat& lv = nodes_.at(loss.id).value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeMismatch("tape: backward requires a scalar output");
  }
  std::vector<Mat> adj(nodes_.size());
  std::vector<bool> live(nodes_.size(), false);

  auto touch = [&](int id, Eigen::Index r, Eigen::Index c) -> Mat& {
    if (!live[id]) {
      adj[id] = Mat::Zero(r, c);
      live[id] = true;
    }
    return adj[id];
  };
  auto accum = [&](int id, const Mat& g) {
    const Mat& v = nodes_[id].value;
    touch(id, v.rows(), v.cols()) += g;
  };

  touch(loss.id, 1, 1)(0, 0) = 1.0;

  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    if (!live[i]) continue;
    const Node& n = nodes_[i];
    const Mat& g = adj[i];
    switch (n.op) {
      case Op::kConst:
        break;
      case Op::kParam:
        store_->grad(n.store_index) += g;
        break;
      case Op::kAdd: {
        const Mat& xa = nodes_[n.a].value;
        const Mat& xb = nodes_[n.b].value;
        accum(n.a, reduce_to(g, xa.rows(), xa.cols()));
        accum(n.b, reduce_to(g, xb.rows(), xb.cols()));
        break;
      }
      case Op::kSub: {
        const Mat& xa = nodes_[n.a].value;
        const Mat& xb = nodes_[n.b].value;
        accum(n.a, reduce_to(g, xa.rows(), xa.cols()));
        accum(n.b, reduce_to(-g, xb.rows(), xb.cols()));
        break;
      }
      case Op::kMul: {
        const Mat& xa = nodes_[n.a].value;
        const Mat& xb = nodes_[n.b].value;
        const Mat ba = broadcast_to(xa, n.value.rows(), n.value.cols());
        const Mat bb = broadcast_to(xb, n.value.rows(), n.value.cols());
        accum(n.a, reduce_to(g.cwiseProduct(bb), xa.rows(), xa.cols()));
        accum(n.b, reduce_to(g.cwiseProduct(ba), xb.rows(), xb.cols()));
        break;
      }
      case Op::kDiv: {
        const Mat& xa = nodes_[n.a].value;
        const Mat& xb = nodes_[n.b].value;
        const Mat ba = broadcast_to(xa, n.value.rows(), n.value.cols());
        const Mat bb = broadcast_to(xb, n.value.rows(), n.value.cols());
        accum(n.a, reduce_to(g.cwiseQuotient(bb), xa.rows(), xa.cols()));
        accum(n.b, reduce_to(Mat(-g.cwiseProduct(ba).cwiseQuotient(bb.cwiseProduct(bb))),
                             xb.rows(), xb.cols()));
        break;
      }
      case Op::kNeg:
        accum(n.a, -g);
        break;
      case Op::kScale:
        accum(n.a, n.s0 * g);
        break;
      case Op::kShift:
        accum(n.a, g);
        break;
      case Op::kMatMul: {
        accum(n.a, g * nodes_[n.b].value.transpose());
        accum(n.b, nodes_[n.a].value.transpose() * g);
        break;
      }
      case Op::kSin:
        accum(n.a, g.cwiseProduct(Mat(nodes_[n.a].value.array().cos())));
        break;
      case Op::kCos:
        accum(n.a, Mat(-g.cwiseProduct(Mat(nodes_[n.a].value.array().sin()))));
        break;
      case Op::kExp:
        accum(n.a, g.cwiseProduct(n.value));
        break;
      case Op::kSqrt: {
        const Mat& x = nodes_[n.a].value;
        Mat d(x.rows(), x.cols());
        for (Eigen::Index k = 0; k < x.size(); ++k) {
          d(k) = x(k) > 0.0 ? 0.5 / std::sqrt(x(k)) : 0.0;
        }
        accum(n.a, g.cwiseProduct(d));
        break;
      }
      case Op::kAbs: {
        const Mat& x = nodes_[n.a].value;
        accum(n.a, g.cwiseProduct(Mat(x.array().sign())));
        break;
      }
      case Op::kRelu: {
        const Mat& x = nodes_[n.a].value;
        accum(n.a, g.cwiseProduct(Mat((x.array() > 0.0).cast<double>())));
        break;
      }
      case Op::kSoftplus:
        accum(n.a, g.cwiseProduct(Mat(nodes_[n.a].value.unaryExpr(&sigmoid_scalar))));
        break;
      case Op::kSigmoid:
        accum(n.a, g.cwiseProduct(Mat(n.value.array() * (1.0 - n.value.array()))));
        break;
      case Op::kRotA:
        accum(n.a, g.cwiseProduct(Mat(nodes_[n.a].value.unaryExpr(&rot_a_dx))));
        break;
      case Op::kRotB:
        accum(n.a, g.cwiseProduct(Mat(nodes_[n.a].value.unaryExpr(&rot_b_dx))));
        break;
      case Op::kRotC:
        accum(n.a, g.cwiseProduct(Mat(nodes_[n.a].value.unaryExpr(&rot_c_dx))));
        break;
      case Op::kSum: {
        const Mat& x = nodes_[n.a].value;
        accum(n.a, Mat::Constant(x.rows(), x.cols(), g(0, 0)));
        break;
      }
      case Op::kMean: {
        const Mat& x = nodes_[n.a].value;
        accum(n.a, Mat::Constant(x.rows(), x.cols(), g(0, 0) / static_cast<double>(x.size())));
        break;
      }
      case Op::kRowSum: {
        const Mat& x = nodes_[n.a].value;
        accum(n.a, g.replicate(1, x.cols()));
        break;
      }
      case Op::kCol: {
        const Mat& x = nodes_[n.a].value;
        Mat gx = Mat::Zero(x.rows(), x.cols());
        gx.col(n.i0) = g;
        accum(n.a, gx);
        break;
      }
      case Op::kHCat: {
        const Mat& xa = nodes_[n.a].value;
        accum(n.a, g.leftCols(n.i0));
        accum(n.b, g.rightCols(g.cols() - xa.cols()));
        break;
      }
      case Op::kGather: {
        const Mat& p = nodes_[n.a].value;
        const Mat& uu = nodes_[n.b].value;
        const Mat& vv = nodes_[n.c].value;
        const int res = n.i0;
        Mat gp = Mat::Zero(p.rows(), p.cols());
        Mat gu = Mat::Zero(uu.rows(), 1);
        Mat gv = Mat::Zero(vv.rows(), 1);
        for (Eigen::Index k = 0; k < uu.rows(); ++k) {
          const LerpAxis au = lerp_axis(uu(k, 0), res);
          const LerpAxis av = lerp_axis(vv(k, 0), res);
          const int i00 = au.lo * res + av.lo;
          const int i10 = (au.lo + 1) * res + av.lo;
          const int i01 = au.lo * res + av.lo + 1;
          const int i11 = (au.lo + 1) * res + av.lo + 1;
          const auto gr = g.row(k);
          gp.row(i00) += (1.0 - au.frac) * (1.0 - av.frac) * gr;
          gp.row(i10) += au.frac * (1.0 - av.frac) * gr;
          gp.row(i01) += (1.0 - au.frac) * av.frac * gr;
          gp.row(i11) += au.frac * av.frac * gr;
          const Eigen::RowVectorXd du = ((p.row(i10) - p.row(i00)) * (1.0 - av.frac) +
                                         (p.row(i11) - p.row(i01)) * av.frac) *
                                        au.dcoord;
          const Eigen::RowVectorXd dv = ((p.row(i01) - p.row(i00)) * (1.0 - au.frac) +
                                         (p.row(i11) - p.row(i10)) * au.frac) *
                                        av.dcoord;
          gu(k, 0) = gr.dot(du);
          gv(k, 0) = gr.dot(dv);
        }
        accum(n.a, gp);
        accum(n.b, gu);
        accum(n.c, gv);
        break;
      }
      case Op::kSegCumsum: {
        const Mat& x = nodes_[n.a].value;
        Mat gx(x.rows(), x.cols());
        for (Eigen::Index start = 0; start < x.rows(); start += n.i0) {
          Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(x.cols());
          for (int k = n.i0 - 1; k >= 0; --k) {
            gx.row(start + k) = acc;
            acc += g.row(start + k);
          }
        }
        accum(n.a, gx);
        break;
      }
      case Op::kSegSum: {
        const Mat& x = nodes_[n.a].value;
        Mat gx(x.rows(), x.cols());
        for (Eigen::Index s = 0; s < g.rows(); ++s) {
          gx.middleRows(s * n.i0, n.i0) = g.row(s).replicate(n.i0, 1);
        }
        accum(n.a, gx);
        break;
      }
    }
    if (i != loss.id) adj[i].resize(0, 0);  // release as we go
  }
}

double value_and_grad(ParamStore& store, const std::function<Var(Tape&)>& f) {
  store.zero_grad();
  Tape tape(&store);
  const Var out = f(tape);
  const double value = tape.scalar_value(out);
  tape.backward(out);
  return value;
}

}  // namespace lieflow::ad
