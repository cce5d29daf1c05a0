#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "lieflow/errors.hpp"
#include "lieflow/param_store.hpp"

namespace lieflow::ad {

using Mat = Eigen::MatrixXd;

// Tensor-valued reverse-mode tape. Nodes are evaluated eagerly as the graph
// is built; backward() visits each node exactly once in reverse topological
// order (which is construction order) and accumulates parameter adjoints
// into the bound ParamStore.
//
// Elementwise binaries broadcast: operands must agree per dimension or have
// extent one (scalar, row vector, column vector).

enum class Op : std::uint8_t {
  kConst,
  kParam,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kScale,    // x * s0
  kShift,    // x + s0
  kMatMul,
  kSin,
  kCos,
  kExp,
  kSqrt,     // subgradient 0 at x == 0
  kAbs,      // subgradient 0 at x == 0
  kRelu,
  kSoftplus,
  kSigmoid,
  kRotA,     // sin(sqrt(x))/sqrt(x)              of x = theta^2
  kRotB,     // (1 - cos(sqrt(x)))/x              of x = theta^2
  kRotC,     // (sqrt(x) - sin(sqrt(x)))/x^(3/2)  of x = theta^2
  kSum,      // full reduction -> 1x1
  kMean,     // full reduction -> 1x1
  kRowSum,   // RxC -> Rx1
  kCol,      // extract column i0
  kHCat,     // [a | b]
  kGather,   // bilinear plane sample; a=plane ((res^2)xF), b=u, c=v, i0=res
  kSegCumsum,  // exclusive cumulative sum within groups of i0 rows
  kSegSum,     // sum within groups of i0 rows -> (R/i0)xC
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  explicit Tape(ParamStore* store = nullptr) : store_(store) {}

  Var constant(Mat m);
  Var scalar(double v) { return constant(Mat::Constant(1, 1, v)); }
  Var param(const std::string& name);
  Var param(int store_index);

  Var add(Var a, Var b) { return binary(Op::kAdd, a, b); }
  Var sub(Var a, Var b) { return binary(Op::kSub, a, b); }
  Var mul(Var a, Var b) { return binary(Op::kMul, a, b); }
  Var div(Var a, Var b) { return binary(Op::kDiv, a, b); }
  Var neg(Var a) { return unary(Op::kNeg, a); }
  Var scale(Var a, double s);
  Var shift(Var a, double s);
  Var matmul(Var a, Var b);
  Var sin(Var a) { return unary(Op::kSin, a); }
  Var cos(Var a) { return unary(Op::kCos, a); }
  Var exp(Var a) { return unary(Op::kExp, a); }
  Var sqrt(Var a) { return unary(Op::kSqrt, a); }
  Var abs(Var a) { return unary(Op::kAbs, a); }
  Var relu(Var a) { return unary(Op::kRelu, a); }
  Var softplus(Var a) { return unary(Op::kSoftplus, a); }
  Var sigmoid(Var a) { return unary(Op::kSigmoid, a); }
  Var rot_coeff_a(Var theta_sq) { return unary(Op::kRotA, theta_sq); }
  Var rot_coeff_b(Var theta_sq) { return unary(Op::kRotB, theta_sq); }
  Var rot_coeff_c(Var theta_sq) { return unary(Op::kRotC, theta_sq); }
  Var sum(Var a);
  Var mean(Var a);
  Var row_sum(Var a);
  Var col(Var a, int j);
  Var hcat(Var a, Var b);
  Var hcat(Var a, Var b, Var c) { return hcat(hcat(a, b), c); }
  Var gather(Var plane, Var u, Var v, int res);
  Var seg_cumsum_exclusive(Var a, int group);
  Var seg_sum(Var a, int group);

  /// Generic dispatch used by property tests; throws UnsupportedPrimitive
  /// for kinds that are not elementwise of the requested arity.
  Var unary(Op op, Var a);
  Var binary(Op op, Var a, Var b);

  const Mat& value(Var v) const { return nodes_.at(v.id).value; }
  double scalar_value(Var v) const;

  /// Reverse pass from a 1x1 node; accumulates into ParamStore gradients.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Op op;
    int a = -1, b = -1, c = -1;
    double s0 = 0.0;
    int i0 = 0;
    int store_index = -1;
    Mat value;
  };

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  static void broadcast_shape(const Mat& a, const Mat& b, Eigen::Index& r, Eigen::Index& c);
  static Mat broadcast_to(const Mat& m, Eigen::Index r, Eigen::Index c);
  static Mat reduce_to(const Mat& g, Eigen::Index r, Eigen::Index c);

  ParamStore* store_;
  std::vector<Node> nodes_;
};

/// Zeroes gradients, builds `f` on a fresh tape, runs backward from its
/// scalar output and returns the value. Gradients land in `store`.
double value_and_grad(ParamStore& store, const std::function<Var(Tape&)>& f);

}  // namespace lieflow::ad
