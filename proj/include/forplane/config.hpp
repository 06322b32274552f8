// SPDX-License-Identifier: Apache-2.0
//
// Every tunable in one place, read from and written to a flat JSON object
// whose keys are dotted names ("plane.feature_dim", "loss.lambda_tv", ...).
#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "forplane/field_model.hpp"
#include "forplane/losses.hpp"
#include "forplane/occupancy.hpp"
#include "forplane/renderer.hpp"
#include "forplane/sampler.hpp"

namespace forplane {

enum class Holdout { Alternate, None };

struct TrainConfig {
  int iterations = 2000;
  int batch_rays = 1024;
  double lr_planes = 1e-2;
  double lr_mlp = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-15;
  double lr_final_fraction = 0.1;  // cosine decay floor
  std::uint64_t seed = 0;
  int log_every = 100;
  int log_eval_frames = 3;   // held-out frames rendered per log line
  int checkpoint_every = 0;  // 0: only the final checkpoint
  Holdout holdout = Holdout::Alternate;
};

struct Config {
  FieldConfig field;
  RenderSettings render;      // training rays
  int eval_steps = 512;       // quadrature steps when rendering frames
  OccupancyConfig occupancy;
  bool occupancy_enabled = true;
  SamplerConfig sampler;
  LossWeights loss;
  TrainConfig train;
  int threads = 1;

  // plane.temporal_res 0 means one time node per frame; encoding.sigma 0
  // means 1 / bins.
  Config() {
    field.planes.temporal_res = 0;
    field.encoding.oneblob.sigma = 0.0;
  }

  FieldConfig resolved_field(std::size_t frames) const;
  // Flat key -> value. Every key is always present.
  nlohmann::json to_json() const;
  // Starts from defaults and applies `j`; unknown keys or bad values throw
  // UsageError.
  static Config from_json(const nlohmann::json& j);
  // Applies one "key=value" override (value parsed as JSON, falling back to
  // a bare string).
  void set(const std::string& assignment);
  void validate() const;
};

Config load_config(const std::string& path);

}  // namespace forplane
