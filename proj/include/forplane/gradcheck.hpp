// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference check of the full training objective in double
// precision on small random fields.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace forplane {

struct GradcheckOptions {
  int configs = 5;
  std::uint64_t seed = 0;
  double h = 1e-3;
  double tolerance = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-7;
  int rays = 6;
};

struct GradcheckConfigResult {
  int index = 0;
  std::string description;
  std::size_t parameters = 0;
  double max_rel_error = 0.0;
  std::string worst_parameter;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckConfigResult> configs;
  double seconds = 0.0;
  bool pass = false;
  double max_rel_error = 0.0;
};

GradcheckReport run_gradcheck(const GradcheckOptions& opts);

}  // namespace forplane
