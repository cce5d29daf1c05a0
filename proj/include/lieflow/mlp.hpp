#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "lieflow/param_store.hpp"
#include "lieflow/rng.hpp"
#include "lieflow/tape.hpp"

namespace lieflow {

/// Fully connected network over row-major batches: y = act(x W + b) per
/// layer, ReLU on hidden layers, linear output. Weights live in a ParamStore
/// under "<prefix>.w<i>" / "<prefix>.b<i>".
class Mlp {
 public:
  Mlp() = default;

  /// Registers parameters. Init is uniform(-1/sqrt(fan_in), 1/sqrt(fan_in));
  /// when zero_init_last is set the final layer starts at exactly zero.
  static Mlp create(ParamStore& store, const std::string& prefix,
                    const std::vector<int>& dims, Rng& rng, bool zero_init_last = false);

  /// Binds to already-registered parameters (e.g. after checkpoint load).
  static Mlp bind(const ParamStore& store, const std::string& prefix,
                  const std::vector<int>& dims);

  Eigen::MatrixXd forward(const ParamStore& store, const Eigen::MatrixXd& x) const;
  ad::Var forward(ad::Tape& tape, ad::Var x) const;

  int input_width() const { return dims_.front(); }
  int output_width() const { return dims_.back(); }
  int layer_count() const { return static_cast<int>(dims_.size()) - 1; }

 private:
  std::vector<int> dims_;
  std::vector<std::string> weight_names_;
  std::vector<std::string> bias_names_;
};

}  // namespace lieflow
