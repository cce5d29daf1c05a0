#include "lieflow/mlp.hpp"

#include <cmath>

#include "lieflow/errors.hpp"

namespace lieflow {

Mlp Mlp::create(ParamStore& store, const std::string& prefix, const std::vector<int>& dims,
                Rng& rng, bool zero_init_last) {
  if (dims.size() < 2) throw std::invalid_argument("Mlp: need at least one layer");
  Mlp mlp;
  mlp.dims_ = dims;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    const bool last = (l + 2 == dims.size());
    const double bound = last && zero_init_last ? 0.0 : 1.0 / std::sqrt(static_cast<double>(fan_in));
    Eigen::MatrixXd w(fan_in, fan_out);
    Eigen::MatrixXd b(1, fan_out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.uniform(-bound, bound);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform(-bound, bound);
    const std::string suffix = std::to_string(l);
    mlp.weight_names_.push_back(prefix + ".w" + suffix);
    mlp.bias_names_.push_back(prefix + ".b" + suffix);
    store.add(mlp.weight_names_.back(), std::move(w));
    store.add(mlp.bias_names_.back(), std::move(b));
  }
  return mlp;
}

Mlp Mlp::bind(const ParamStore& store, const std::string& prefix, const std::vector<int>& dims) {
  if (dims.size() < 2) throw std::invalid_argument("Mlp: need at least one layer");
  Mlp mlp;
  mlp.dims_ = dims;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::string suffix = std::to_string(l);
    mlp.weight_names_.push_back(prefix + ".w" + suffix);
    mlp.bias_names_.push_back(prefix + ".b" + suffix);
    (void)store.index(mlp.weight_names_.back());
    (void)store.index(mlp.bias_names_.back());
  }
  return mlp;
}

Eigen::MatrixXd Mlp::forward(const ParamStore& store, const Eigen::MatrixXd& x) const {
  if (x.cols() != dims_.front()) throw ShapeMismatch("Mlp: input width mismatch");
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < weight_names_.size(); ++l) {
    h = (h * store.value(weight_names_[l])).rowwise() +
        store.value(bias_names_[l]).row(0);
    if (l + 1 < weight_names_.size()) h = h.array().max(0.0);
  }
  return h;
}

ad::Var Mlp::forward(ad::Tape& tape, ad::Var x) const {
  if (tape.value(x).cols() != dims_.front()) throw ShapeMismatch("Mlp: input width mismatch");
  ad::Var h = x;
  for (std::size_t l = 0; l < weight_names_.size(); ++l) {
    h = tape.add(tape.matmul(h, tape.param(weight_names_[l])), tape.param(bias_names_[l]));
    if (l + 1 < weight_names_.size()) h = tape.relu(h);
  }
  return h;
}

}  // namespace lieflow
