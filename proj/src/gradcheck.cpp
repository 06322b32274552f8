// SPDX-License-Identifier: Apache-2.0
#include "forplane/gradcheck.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include "forplane/objective.hpp"

namespace forplane {

namespace {

struct Entry {
  std::string name;
  double* value;
  const double* grad;
};

std::vector<Entry> entries(FieldModel<double>& m, FieldGrads<double>& g) {
  std::vector<Entry> out;
  auto& planes = m.planes.planes();
  for (std::size_t k = 0; k < planes.size(); ++k) {
    const std::string base = "planes.L" + std::to_string(k / kPlanesPerLevel) + "." +
                             std::string(axis_name(planes[k].axes)) + "[";
    for (std::size_t i = 0; i < planes[k].values.size(); ++i) {
      out.push_back({base + std::to_string(i) + "]", &planes[k].values[i],
                     &g.planes.planes[k][i]});
    }
  }
  auto layers = m.mlp.layers();
  auto glayers = g.mlp.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string base = "mlp.layer" + std::to_string(l);
    for (std::size_t i = 0; i < layers[l]->weight.size(); ++i) {
      out.push_back({base + ".weight[" + std::to_string(i) + "]", &layers[l]->weight[i],
                     &glayers[l]->weight[i]});
    }
    for (std::size_t i = 0; i < layers[l]->bias.size(); ++i) {
      out.push_back({base + ".bias[" + std::to_string(i) + "]", &layers[l]->bias[i],
                     &glayers[l]->bias[i]});
    }
  }
  return out;
}

// Shifts hidden-unit biases so that no pre-activation at any of the batch's
// sample points lies within `margin` of the ReLU kink.
void condition_relus(FieldModel<double>& model, const RayBatch<double>& batch,
                     const Aabb& aabb, int steps, double margin) {
  const FieldQuery<double> q = FieldQuery<double>::of(model);
  std::vector<std::pair<SamplePoint, Vec3>> points;
  for (const Ray& ray : batch.rays) {
    RayMarcher marcher(nullptr, ray, aabb, steps, 0.0);
    while (auto p = marcher.next(1.0)) points.push_back({*p, ray.dir});
  }
  auto fix_net = [&](bool sigma_net) {
    auto& net = sigma_net ? model.mlp.sigma_net : model.mlp.color_net;
    for (std::size_t l = 0; l + 1 < net.size(); ++l) {
      std::vector<std::vector<double>> pre(net[l].out);
      PointCache<double> cache;
      for (const auto& [p, dir] : points) {
        q.evaluate(p, dir, cache);
        const auto& z = sigma_net ? cache.mlp.sigma_pre[l] : cache.mlp.color_pre[l];
        for (int o = 0; o < net[l].out; ++o) pre[o].push_back(z[o]);
      }
      for (int o = 0; o < net[l].out; ++o) {
        // Smallest shift s (scanning outward) with |z + s| >= margin everywhere.
        for (int k = 0; k < 4000; ++k) {
          const double s = (k % 2 ? -1.0 : 1.0) * (k / 2) * 0.25 * margin;
          bool ok = true;
          for (double z : pre[o]) ok &= std::abs(z + s) >= margin;
          if (ok) {
            net[l].bias[o] += s;
            break;
          }
        }
      }
    }
  };
  fix_net(true);
  fix_net(false);
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  GradcheckReport report;
  report.pass = true;
  const DepthMode modes[3] = {DepthMode::Stereo, DepthMode::Monocular, DepthMode::None};
  for (int ci = 0; ci < opts.configs; ++ci) {
    std::mt19937_64 rng(opts.seed * 1000003ULL + static_cast<std::uint64_t>(ci));
    std::uniform_real_distribution<double> u(0.0, 1.0);

    FieldConfig fc;
    fc.planes.spatial_res = {8, 8};
    fc.planes.temporal_res = 8;
    fc.planes.feature_dim = 4;
    fc.planes.fusion = ci == 3 ? FusionMode::ConcatLevels : FusionMode::Product;
    fc.encoding.oneblob.bins = 4;
    fc.encoding.oneblob.sigma = 0.25;
    fc.dynamic_random_init = true;
    FieldModel<double> model(fc);
    model.init(fc, rng);
    // Keep every dynamic value off the |1 - g| kink.
    for (auto& p : model.planes.planes()) {
      if (!is_space_time(p.axes)) continue;
      for (double& v : p.values) {
        if (std::abs(v - 1.0) < 0.01) v = 1.0 + (v >= 1.0 ? 0.01 : -0.01);
      }
    }

    ObjectiveSettings s;
    s.render.steps = 4;
    s.render.t_min = 0.0;
    s.render.normalize_depth = ci == 4;
    s.weights.depth_mode = modes[ci % 3];
    s.weights.lambda_d = 0.5 + 1.5 * u(rng);
    s.weights.lambda_tv = 0.01 + 0.5 * u(rng);
    s.weights.lambda_ts = 0.01 + 0.5 * u(rng);
    s.weights.lambda_de = 0.01 + 0.5 * u(rng);
    s.weights.huber_delta = 0.05 + 0.2 * u(rng);

    Aabb aabb;
    RayBatch<double> batch;
    for (int r = 0; r < opts.rays; ++r) {
      // Rays from a random point outside the unit box toward a random
      // interior target; the march interval is exactly the box overlap so all
      // four samples land inside.
      const Vec3 target(0.2 + 0.6 * u(rng), 0.2 + 0.6 * u(rng), 0.2 + 0.6 * u(rng));
      Vec3 d(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5);
      d.normalize();
      Ray ray;
      ray.origin = target - 2.0 * d;
      ray.dir = d;
      double t0, t1;
      aabb.intersect(ray.origin, ray.dir, t0, t1);
      ray.t_near = t0;
      ray.t_far = t1;
      ray.time = u(rng);
      batch.rays.push_back(ray);
      batch.gt_rgb.push_back({u(rng), u(rng), u(rng)});
      // Every third ray has no depth.
      batch.gt_depth.push_back(r % 3 == 2 ? 0.0 : t0 + (t1 - t0) * u(rng) + (r % 2) * 0.5);
    }
    condition_relus(model, batch, aabb, s.render.steps, 0.02);

    ObjectiveWorkspace<double> ws;
    // Keep Huber residuals away from +-delta.
    if (s.weights.depth_mode == DepthMode::Stereo) {
      evaluate_objective<double>(model, batch, aabb, nullptr, s, nullptr, ws);
      for (std::size_t r = 0; r < batch.size(); ++r) {
        if (batch.gt_depth[r] <= 0.0) continue;
        const double res = ws.pred_depth[r] - batch.gt_depth[r];
        if (std::abs(std::abs(res) - s.weights.huber_delta) < 0.02) batch.gt_depth[r] += 0.05;
      }
    }

    FieldGrads<double> grads(model);
    evaluate_objective<double>(model, batch, aabb, nullptr, s, &grads, ws);

    GradcheckConfigResult res;
    res.index = ci;
    res.description = std::string("depth=") + to_string(s.weights.depth_mode) +
                      (fc.planes.fusion == FusionMode::ConcatLevels ? " fusion=concat" : " fusion=product") +
                      (s.render.normalize_depth ? " normalized-depth" : "");
    auto list = entries(model, grads);
    res.parameters = list.size();
    for (const auto& e : list) {
      const double orig = *e.value;
      *e.value = orig + opts.h;
      const double lp = evaluate_objective<double>(model, batch, aabb, nullptr, s, nullptr, ws).total;
      *e.value = orig - opts.h;
      const double lm = evaluate_objective<double>(model, batch, aabb, nullptr, s, nullptr, ws).total;
      *e.value = orig;
      const double numeric = (lp - lm) / (2.0 * opts.h);
      const double analytic = *e.grad;
      const double rel = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), opts.floor});
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_parameter = e.name;
        res.worst_analytic = analytic;
        res.worst_numeric = numeric;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, res.max_rel_error);
    report.pass &= res.max_rel_error < opts.tolerance;
    report.configs.push_back(res);
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace forplane
