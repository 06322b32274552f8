// SPDX-License-Identifier: Apache-2.0
#include "forplane/adam.hpp"

#include <cmath>
#include <numbers>

namespace forplane {

void AdamState::reset(std::span<const ParamGroup> groups) {
  m.clear();
  v.clear();
  for (const auto& g : groups) {
    m.emplace_back(g.values.size(), 0.0f);
    v.emplace_back(g.values.size(), 0.0f);
  }
  step = 0;
}

void adam_step(AdamState& state, std::span<const ParamGroup> groups,
               const AdamConfig& cfg, double lr_scale) {
  if (state.m.size() != groups.size()) throw UsageError("Adam state does not match parameter groups");
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const auto& g = groups[k];
    if (g.grads.size() != g.values.size() || state.m[k].size() != g.values.size()) {
      throw UsageError("Adam shape mismatch in group " + g.name);
    }
    for (float x : g.grads) {
      if (!std::isfinite(x)) throw NumericalError("non-finite gradient in parameter group " + g.name);
    }
  }
  ++state.step;
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const auto& g = groups[k];
    const double lr = g.lr * lr_scale;
    float* m = state.m[k].data();
    float* v = state.v[k].data();
    bool finite = true;
    for (std::size_t i = 0; i < g.values.size(); ++i) {
      const double grad = g.grads[i];
      const double mi = b1 * m[i] + (1.0 - b1) * grad;
      const double vi = b2 * v[i] + (1.0 - b2) * grad * grad;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double update = lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.eps);
      g.values[i] = static_cast<float>(g.values[i] - update);
      finite &= std::isfinite(g.values[i]);
    }
    if (!finite) throw NumericalError("non-finite parameter after update in group " + g.name);
  }
}

std::vector<ParamGroup> param_groups(FieldModel<float>& model,
                                     FieldGrads<float>& grads,
                                     double lr_planes, double lr_mlp) {
  std::vector<ParamGroup> out;
  auto& planes = model.planes.planes();
  for (std::size_t k = 0; k < planes.size(); ++k) {
    const std::string name = "planes.L" + std::to_string(k / kPlanesPerLevel) + "." +
                             std::string(axis_name(planes[k].axes));
    out.push_back({name, planes[k].values, grads.planes.planes[k], lr_planes});
  }
  auto layers = model.mlp.layers();
  auto glayers = grads.mlp.layers();
  const std::size_t nsigma = model.mlp.sigma_net.size();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const std::string base = k < nsigma ? "mlp.sigma" + std::to_string(k)
                                        : "mlp.color" + std::to_string(k - nsigma);
    out.push_back({base + ".weight", layers[k]->weight, glayers[k]->weight, lr_mlp});
    out.push_back({base + ".bias", layers[k]->bias, glayers[k]->bias, lr_mlp});
  }
  return out;
}

double cosine_lr_scale(int iteration, int total, double final_fraction) {
  if (total <= 0) return 1.0;
  const double x = std::min(1.0, static_cast<double>(iteration) / total);
  return final_fraction +
         (1.0 - final_fraction) * 0.5 * (1.0 + std::cos(std::numbers::pi * x));
}

}  // namespace forplane
