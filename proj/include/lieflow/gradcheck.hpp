#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lieflow {

struct GradCheckResult {
  std::string name;
  double max_abs_err = 0;     // worst |analytic - finite difference|
  double max_scaled_err = 0;  // worst mismatch relative to the larger magnitude
  int checked = 0;            // parameter coordinates swept
  bool pass = false;
};

/// Central finite-difference validation (step 1e-5, fp64) of every loss and
/// both field networks on small randomly drawn configurations. Each draw
/// sweeps every parameter coordinate. A coordinate passes when
/// |analytic - fd| <= 1e-4 * max(|analytic|, |fd|) + 1e-7.
std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed, int draws = 5);

bool all_passed(const std::vector<GradCheckResult>& results);

}  // namespace lieflow
