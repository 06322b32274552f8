// SPDX-License-Identifier: Apache-2.0
//
// Batch objective: renders a set of rays through the field, evaluates the
// weighted loss, and backpropagates into per-worker gradient buffers.
#pragma once

#include <span>
#include <vector>

#include "forplane/field_model.hpp"
#include "forplane/losses.hpp"
#include "forplane/parallel.hpp"

namespace forplane {

template <typename T>
struct RayBatch {
  std::vector<Ray> rays;
  std::vector<Rgb<T>> gt_rgb;
  std::vector<T> gt_depth;  // 0 = invalid; ignored when depth_mode is None

  std::size_t size() const { return rays.size(); }
  void clear() {
    rays.clear();
    gt_rgb.clear();
    gt_depth.clear();
  }
};

// Scratch reused across calls: per-worker gradients and ray workspaces plus
// per-ray outputs of the last call.
template <typename T>
struct ObjectiveWorkspace {
  std::vector<FieldGrads<T>> worker_grads;
  std::vector<RayWorkspace<T>> rays;
  std::vector<Rgb<T>> pred_rgb;
  std::vector<T> pred_depth;
  std::vector<T> d_depth;
  std::vector<int> samples;
};

struct ObjectiveSettings {
  RenderSettings render;
  LossWeights weights;
  int threads = 1;
};

// Loss of `batch` under `model`. When `grads` is non-null the full gradient
// (ray terms and plane regularizers) is added to it.
template <typename T>
LossTerms<T> evaluate_objective(const FieldModel<T>& model,
                                const RayBatch<T>& batch, const Aabb& aabb,
                                const IndicatorGrid* grid,
                                const ObjectiveSettings& s,
                                FieldGrads<T>* grads,
                                ObjectiveWorkspace<T>& ws) {
  const std::size_t n = batch.size();
  const FieldQuery<T> q = FieldQuery<T>::of(model);
  const LossWeights& w = s.weights;
  const bool use_depth = w.depth_mode != DepthMode::None;
  ws.pred_rgb.assign(n, Rgb<T>{});
  ws.pred_depth.assign(n, T(0));
  ws.d_depth.assign(n, T(0));
  ws.samples.assign(n, 0);
  const int workers = std::max(1, s.threads);

  // Monocular alignment couples the whole batch, so its depth gradients need
  // a forward pass over every ray before any backward pass.
  const bool two_pass = grads && use_depth && w.depth_mode == DepthMode::Monocular;
  if (!grads || two_pass) {
    parallel_chunks(n, workers, [&](int, std::size_t b, std::size_t e) {
      for (std::size_t r = b; r < e; ++r) {
        const Ray& ray = batch.rays[r];
        const RenderOutput<T> out = render_ray_field<T>(q, ray, aabb, grid, s.render);
        ws.pred_rgb[r] = out.rgb;
        ws.pred_depth[r] = out.depth;
        ws.samples[r] = out.samples;
      }
    });
  }

  if (grads) {
    if (two_pass) {
      mono_loss<T>(ws.pred_depth, batch.gt_depth, ws.d_depth, static_cast<T>(w.lambda_d));
    }
    std::size_t valid = 0;
    for (T d : batch.gt_depth) valid += d > T(0);
    const T inv_batch = T(1) / static_cast<T>(std::max<std::size_t>(n, 1));
    const T depth_scale =
        valid ? static_cast<T>(w.lambda_d) / static_cast<T>(valid) : T(0);
    const T delta = static_cast<T>(w.huber_delta);

    const int used = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(n, 1))));
    if (static_cast<int>(ws.rays.size()) < used) ws.rays.resize(used);
    if (used > 1) {
      while (static_cast<int>(ws.worker_grads.size()) < used - 1) {
        ws.worker_grads.emplace_back(model);
      }
      for (int k = 0; k < used - 1; ++k) ws.worker_grads[k].zero();
    }
    parallel_chunks(n, used, [&](int worker, std::size_t b, std::size_t e) {
      FieldGrads<T>& g = worker == 0 ? *grads : ws.worker_grads[worker - 1];
      RayWorkspace<T>& rw = ws.rays[worker];
      for (std::size_t r = b; r < e; ++r) {
        const Ray& ray = batch.rays[r];
        const RenderOutput<T> out = render_ray_train(q, ray, aabb, grid, s.render, rw);
        ws.pred_rgb[r] = out.rgb;
        ws.pred_depth[r] = out.depth;
        ws.samples[r] = out.samples;
        Rgb<T> d_rgb;
        for (int c = 0; c < 3; ++c) {
          d_rgb[c] = T(2) * (out.rgb[c] - batch.gt_rgb[r][c]) * inv_batch;
        }
        T d_depth = T(0);
        if (w.depth_mode == DepthMode::Stereo && batch.gt_depth[r] > T(0)) {
          d_depth = depth_scale * huber_slope(out.depth - batch.gt_depth[r], delta);
        } else if (two_pass) {
          d_depth = ws.d_depth[r];
        }
        ray_backward(q, out, s.render, rw, d_rgb, d_depth, g);
      }
    });
    for (int k = 0; k < used - 1; ++k) grads->add(ws.worker_grads[k]);
  }

  const std::span<const T> gt_depth =
      use_depth ? std::span<const T>(batch.gt_depth) : std::span<const T>(ws.pred_depth);
  LossWeights lw = w;
  if (!use_depth) lw.depth_mode = DepthMode::None;
  return total_loss<T>(lw, ws.pred_rgb, batch.gt_rgb, ws.pred_depth, gt_depth,
                       model.planes, {}, {}, grads ? &grads->planes : nullptr);
}

}  // namespace forplane
