// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "forplane/field_model.hpp"

namespace forplane {

struct ParamGroup {
  std::string name;
  std::span<float> values;
  std::span<const float> grads;
  double lr = 1e-3;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-15;
};

struct AdamState {
  std::vector<std::vector<float>> m;  // one per group
  std::vector<std::vector<float>> v;
  std::int64_t step = 0;

  // Zero moments shaped like `groups`.
  void reset(std::span<const ParamGroup> groups);
};

// Bias-corrected Adam with learning rate group.lr * lr_scale. Throws
// NumericalError naming the group on a non-finite gradient or update.
void adam_step(AdamState& state, std::span<const ParamGroup> groups,
               const AdamConfig& cfg, double lr_scale = 1.0);

// Plane groups ("planes.L<level>.<axes>") then MLP layers
// ("mlp.sigma<k>.weight", ...), matching the checkpoint order.
std::vector<ParamGroup> param_groups(FieldModel<float>& model,
                                     FieldGrads<float>& grads,
                                     double lr_planes, double lr_mlp);

// lr_final_fraction + (1 - lr_final_fraction) * (1 + cos(pi t / T)) / 2.
double cosine_lr_scale(int iteration, int total, double final_fraction);

}  // namespace forplane
