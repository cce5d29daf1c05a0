#include "lieflow/adam.hpp"

#include <cmath>

#include "lieflow/errors.hpp"

namespace lieflow {

void adam_step(ParamStore& store, const std::vector<int>& indices, AdamState& state,
               const AdamConfig& cfg) {
  if (state.m.empty()) {
    state.m.reserve(indices.size());
    state.v.reserve(indices.size());
    for (int idx : indices) {
      const auto& val = store.value(idx);
      state.m.push_back(Eigen::MatrixXd::Zero(val.rows(), val.cols()));
      state.v.push_back(Eigen::MatrixXd::Zero(val.rows(), val.cols()));
    }
  }
  if (state.m.size() != indices.size()) {
    throw ShapeMismatch("adam_step: state does not match parameter group");
  }

  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

  for (std::size_t k = 0; k < indices.size(); ++k) {
    const int idx = indices[k];
    const Eigen::MatrixXd& g = store.grad(idx);
    Eigen::MatrixXd& m = state.m[k];
    Eigen::MatrixXd& v = state.v[k];
    if (g.rows() != m.rows() || g.cols() != m.cols()) {
      throw ShapeMismatch("adam_step: gradient shape disagrees with state");
    }
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v.array().matrix() + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const Eigen::ArrayXXd m_hat = m.array() / bc1;
    const Eigen::ArrayXXd v_hat = v.array() / bc2;
    store.value(idx).array() -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
  }
}

}  // namespace lieflow
