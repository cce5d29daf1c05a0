#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "lieflow/param_store.hpp"

namespace lieflow {

/// First/second moment buffers for one optimizer group, aligned with a fixed
/// list of ParamStore indices.
struct AdamState {
  std::vector<Eigen::MatrixXd> m;
  std::vector<Eigen::MatrixXd> v;
  std::int64_t step = 0;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Standard Adam update over the given store entries, reading store.grad and
/// writing store.value in place. State buffers are created on first use.
void adam_step(ParamStore& store, const std::vector<int>& indices, AdamState& state,
               const AdamConfig& cfg);

}  // namespace lieflow
