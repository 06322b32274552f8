// SPDX-License-Identifier: Apache-2.0
#include "forplane/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>

namespace forplane {

using nlohmann::json;

namespace {

std::string fusion_name(FusionMode m) {
  return m == FusionMode::Product ? "product" : "concat";
}

FusionMode parse_fusion(const std::string& s) {
  if (s == "product") return FusionMode::Product;
  if (s == "concat") return FusionMode::ConcatLevels;
  throw UsageError("plane.fusion must be 'product' or 'concat', got '" + s + "'");
}

std::string holdout_name(Holdout h) { return h == Holdout::Alternate ? "alternate" : "none"; }

Holdout parse_holdout(const std::string& s) {
  if (s == "alternate") return Holdout::Alternate;
  if (s == "none") return Holdout::None;
  throw UsageError("train.holdout must be 'alternate' or 'none', got '" + s + "'");
}

// Key table: getter into json, setter from json.
struct Binding {
  std::function<json(const Config&)> get;
  std::function<void(Config&, const json&)> set;
};

template <typename M>
Binding bind(M member) {
  return {[member](const Config& c) { return json(member(const_cast<Config&>(c))); },
          [member](Config& c, const json& v) {
            member(c) = v.get<std::decay_t<decltype(member(c))>>();
          }};
}

#define FP_BIND(expr) bind([](Config& c) -> auto& { return expr; })

const std::map<std::string, Binding>& bindings() {
  static const std::map<std::string, Binding> table = [] {
    std::map<std::string, Binding> t;
    t["plane.spatial_res"] = FP_BIND(c.field.planes.spatial_res);
    t["plane.temporal_res"] = FP_BIND(c.field.planes.temporal_res);
    t["plane.feature_dim"] = FP_BIND(c.field.planes.feature_dim);
    t["plane.fusion"] = {
        [](const Config& c) { return json(fusion_name(c.field.planes.fusion)); },
        [](Config& c, const json& v) { c.field.planes.fusion = parse_fusion(v.get<std::string>()); }};
    t["plane.static_init_lo"] = FP_BIND(c.field.static_init_lo);
    t["plane.static_init_hi"] = FP_BIND(c.field.static_init_hi);
    t["plane.dynamic_random_init"] = FP_BIND(c.field.dynamic_random_init);
    t["encoding.kind"] = {
        [](const Config& c) { return json(to_string(c.field.encoding.kind)); },
        [](Config& c, const json& v) {
          c.field.encoding.kind = parse_encoding_kind(v.get<std::string>());
        }};
    t["encoding.bins"] = FP_BIND(c.field.encoding.oneblob.bins);
    t["encoding.sigma"] = FP_BIND(c.field.encoding.oneblob.sigma);
    t["encoding.octaves"] = FP_BIND(c.field.encoding.frequency.num_octaves);
    t["mlp.hidden_features"] = FP_BIND(c.field.hidden_features);
    t["mlp.large"] = FP_BIND(c.field.large_mlp);
    t["render.steps"] = FP_BIND(c.render.steps);
    t["render.eval_steps"] = FP_BIND(c.eval_steps);
    t["render.t_min"] = FP_BIND(c.render.t_min);
    t["render.normalize_depth"] = FP_BIND(c.render.normalize_depth);
    t["occupancy.enabled"] = FP_BIND(c.occupancy_enabled);
    t["occupancy.dims"] = FP_BIND(c.occupancy.dims);
    t["occupancy.threshold"] = FP_BIND(c.occupancy.threshold);
    t["occupancy.init_density"] = FP_BIND(c.occupancy.init_density);
    t["occupancy.probes"] = FP_BIND(c.occupancy.probes);
    t["occupancy.ema"] = FP_BIND(c.occupancy.ema);
    t["occupancy.update_every"] = FP_BIND(c.occupancy.update_every);
    t["occupancy.warmup"] = FP_BIND(c.occupancy.warmup);
    t["occupancy.t_min"] = FP_BIND(c.occupancy.t_min);
    t["sampler.kind"] = {
        [](const Config& c) { return json(to_string(c.sampler.kind)); },
        [](Config& c, const json& v) { c.sampler.kind = parse_sampler_kind(v.get<std::string>()); }};
    t["sampler.alpha"] = FP_BIND(c.sampler.alpha);
    t["sampler.beta"] = FP_BIND(c.sampler.beta);
    t["sampler.window"] = FP_BIND(c.sampler.window);
    t["loss.lambda_d"] = FP_BIND(c.loss.lambda_d);
    t["loss.lambda_tv"] = FP_BIND(c.loss.lambda_tv);
    t["loss.lambda_ts"] = FP_BIND(c.loss.lambda_ts);
    t["loss.lambda_de"] = FP_BIND(c.loss.lambda_de);
    t["loss.huber_delta"] = FP_BIND(c.loss.huber_delta);
    t["loss.depth_mode"] = {
        [](const Config& c) { return json(to_string(c.loss.depth_mode)); },
        [](Config& c, const json& v) { c.loss.depth_mode = parse_depth_mode(v.get<std::string>()); }};
    t["train.iterations"] = FP_BIND(c.train.iterations);
    t["train.batch_rays"] = FP_BIND(c.train.batch_rays);
    t["train.lr_planes"] = FP_BIND(c.train.lr_planes);
    t["train.lr_mlp"] = FP_BIND(c.train.lr_mlp);
    t["train.beta1"] = FP_BIND(c.train.beta1);
    t["train.beta2"] = FP_BIND(c.train.beta2);
    t["train.eps"] = FP_BIND(c.train.eps);
    t["train.lr_final_fraction"] = FP_BIND(c.train.lr_final_fraction);
    t["train.seed"] = FP_BIND(c.train.seed);
    t["train.log_every"] = FP_BIND(c.train.log_every);
    t["train.log_eval_frames"] = FP_BIND(c.train.log_eval_frames);
    t["train.checkpoint_every"] = FP_BIND(c.train.checkpoint_every);
    t["train.holdout"] = {
        [](const Config& c) { return json(holdout_name(c.train.holdout)); },
        [](Config& c, const json& v) { c.train.holdout = parse_holdout(v.get<std::string>()); }};
    t["threads"] = FP_BIND(c.threads);
    return t;
  }();
  return table;
}

#undef FP_BIND

}  // namespace

json Config::to_json() const {
  json j = json::object();
  for (const auto& [key, b] : bindings()) j[key] = b.get(*this);
  return j;
}

Config Config::from_json(const json& j) {
  if (!j.is_object()) throw UsageError("config must be a flat JSON object");
  Config c;
  const auto& table = bindings();
  for (const auto& [key, value] : j.items()) {
    const auto it = table.find(key);
    if (it == table.end()) throw UsageError("unknown config key '" + key + "'");
    try {
      it->second.set(c, value);
    } catch (const json::exception& e) {
      throw UsageError("bad value for config key '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

void Config::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw UsageError("override must look like key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json j = to_json();
  if (!j.contains(key)) throw UsageError("unknown config key '" + key + "'");
  j[key] = value;
  *this = from_json(j);
}

void Config::validate() const {
  const auto& p = field.planes;
  if (p.spatial_res.empty()) throw UsageError("plane.spatial_res must list at least one level");
  for (int r : p.spatial_res) {
    if (r < 2) throw UsageError("plane.spatial_res entries must be >= 2");
  }
  if (p.temporal_res != 0 && p.temporal_res < 2) {
    throw UsageError("plane.temporal_res must be 0 (frame count) or >= 2");
  }
  if (p.feature_dim < 1) throw UsageError("plane.feature_dim must be >= 1");
  if (!(field.static_init_hi >= field.static_init_lo)) {
    throw UsageError("plane.static_init_hi must be >= plane.static_init_lo");
  }
  if (field.encoding.oneblob.bins < 2) throw UsageError("encoding.bins must be >= 2");
  if (field.encoding.oneblob.sigma < 0.0) throw UsageError("encoding.sigma must be >= 0");
  if (field.encoding.frequency.num_octaves < 0) throw UsageError("encoding.octaves must be >= 0");
  if (field.hidden_features < 0) throw UsageError("mlp.hidden_features must be >= 0");
  if (render.steps < 1 || eval_steps < 1) throw UsageError("render steps must be >= 1");
  if (render.t_min < 0.0) throw UsageError("render.t_min must be >= 0");
  for (int d : occupancy.dims) {
    if (d < 1) throw UsageError("occupancy.dims entries must be >= 1");
  }
  if (!(occupancy.ema > 0.0 && occupancy.ema <= 1.0)) {
    throw UsageError("occupancy.ema must be in (0,1]");
  }
  if (occupancy.update_every < 1) throw UsageError("occupancy.update_every must be >= 1");
  if (!(sampler.alpha > 0.0) || !(sampler.beta > 0.0) || sampler.window < 1) {
    throw UsageError("sampler needs alpha > 0, beta > 0, window >= 1");
  }
  for (double l : {loss.lambda_d, loss.lambda_tv, loss.lambda_ts, loss.lambda_de}) {
    if (!(l >= 0.0)) throw UsageError("loss weights must be >= 0");
  }
  if (!(loss.huber_delta > 0.0)) throw UsageError("loss.huber_delta must be > 0");
  if (train.iterations < 1) throw UsageError("train.iterations must be >= 1");
  if (train.batch_rays < 1) throw UsageError("train.batch_rays must be >= 1");
  if (!(train.lr_planes > 0.0) || !(train.lr_mlp > 0.0)) {
    throw UsageError("learning rates must be > 0");
  }
  if (!(train.beta1 >= 0.0 && train.beta1 < 1.0) || !(train.beta2 >= 0.0 && train.beta2 < 1.0)) {
    throw UsageError("Adam betas must be in [0,1)");
  }
  if (!(train.eps > 0.0)) throw UsageError("train.eps must be > 0");
  if (!(train.lr_final_fraction >= 0.0 && train.lr_final_fraction <= 1.0)) {
    throw UsageError("train.lr_final_fraction must be in [0,1]");
  }
  if (train.log_every < 1) throw UsageError("train.log_every must be >= 1");
  if (threads < 1) throw UsageError("threads must be >= 1");
}

FieldConfig Config::resolved_field(std::size_t frames) const {
  FieldConfig f = field;
  if (f.planes.temporal_res == 0) {
    f.planes.temporal_res = static_cast<int>(std::max<std::size_t>(frames, 2));
  }
  if (f.encoding.oneblob.sigma == 0.0) f.encoding.oneblob.sigma = 1.0 / f.encoding.oneblob.bins;
  return f;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw UsageError("config " + path + " is not valid JSON");
  return Config::from_json(j);
}

}  // namespace forplane
