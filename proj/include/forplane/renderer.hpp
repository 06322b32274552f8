// SPDX-License-Identifier: Apache-2.0
//
// Discrete volume rendering along marched rays:
//   alpha_i = 1 - exp(-sigma_i delta_i),  T_i = prod_{j<i} (1 - alpha_j),
//   w_i = T_i alpha_i,  rgb = sum w_i c_i,  depth = sum w_i t_i,
//   opacity = sum w_i.
// Composited onto black; empty sample lists give zeros.
#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "forplane/camera.hpp"
#include "forplane/common.hpp"
#include "forplane/field_mlp.hpp"
#include "forplane/occupancy.hpp"

namespace forplane {

template <typename T>
struct SampleRadiance {
  T sigma = T(0);
  Rgb<T> rgb{};
  T delta = T(0);
  T t = T(0);
};

template <typename T>
struct RenderOutput {
  Rgb<T> rgb{};
  T depth = T(0);      // reported depth (raw or opacity-normalized)
  T depth_raw = T(0);  // sum w_i t_i
  T opacity = T(0);
  int samples = 0;     // samples composited on this ray
};

template <typename T>
struct CompositeCache {
  std::vector<T> alpha;
  std::vector<T> trans;    // T_i, transmittance before sample i
  std::vector<T> weights;
};

template <typename T>
struct SampleGrad {
  T d_sigma = T(0);
  Rgb<T> d_rgb{};
};

struct RenderSettings {
  int steps = 128;
  double t_min = 1e-4;          // early termination; 0 disables
  bool normalize_depth = false;  // report sum(w t) / sum(w)
};

template <typename T>
RenderOutput<T> composite(std::span<const SampleRadiance<T>> samples,
                          CompositeCache<T>* cache = nullptr) {
  RenderOutput<T> out;
  T trans = T(1);
  if (cache) {
    cache->alpha.resize(samples.size());
    cache->trans.resize(samples.size());
    cache->weights.resize(samples.size());
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const T alpha = -std::expm1(-s.sigma * s.delta);
    const T w = trans * alpha;
    if (cache) {
      cache->alpha[i] = alpha;
      cache->trans[i] = trans;
      cache->weights[i] = w;
    }
    for (int c = 0; c < 3; ++c) out.rgb[c] += w * s.rgb[c];
    out.depth_raw += w * s.t;
    out.opacity += w;
    trans *= T(1) - alpha;
  }
  out.depth = out.depth_raw;
  out.samples = static_cast<int>(samples.size());
  return out;
}

// Gradients of L = d_rgb . rgb + d_depth_raw * depth_raw + d_opacity * opacity
// with respect to every sample's sigma and color. Raising sigma_i lowers the
// transmittance of every later sample:
//   dL/dsigma_i = delta_i (T_{i+1} g_i - sum_{k>i} w_k g_k),
//   g_i = d_rgb . c_i + d_depth_raw t_i + d_opacity.
template <typename T>
void composite_backward(std::span<const SampleRadiance<T>> samples,
                        const CompositeCache<T>& cache, const Rgb<T>& d_rgb,
                        T d_depth_raw, T d_opacity,
                        std::span<SampleGrad<T>> out) {
  T tail = T(0);
  for (std::size_t i = samples.size(); i-- > 0;) {
    const auto& s = samples[i];
    const T g = d_rgb[0] * s.rgb[0] + d_rgb[1] * s.rgb[1] +
                d_rgb[2] * s.rgb[2] + d_depth_raw * s.t + d_opacity;
    const T w = cache.weights[i];
    const T trans_after = cache.trans[i] * (T(1) - cache.alpha[i]);
    out[i].d_sigma = s.delta * (trans_after * g - tail);
    for (int c = 0; c < 3; ++c) out[i].d_rgb[c] = d_rgb[c] * w;
    tail += w * g;
  }
}

// Chain rule from the reported depth back to (depth_raw, opacity).
template <typename T>
void depth_grad(const RenderOutput<T>& out, const RenderSettings& settings,
                T d_depth, T& d_depth_raw, T& d_opacity) {
  if (!settings.normalize_depth) {
    d_depth_raw += d_depth;
    return;
  }
  const T op = std::max(out.opacity, T(1e-10));
  d_depth_raw += d_depth / op;
  d_opacity -= d_depth * out.depth_raw / (op * op);
}

// Marches `ray` (grid-filtered when `grid` is non-null), evaluates
// `field(point) -> FieldOutput<T>` for each surviving sample, and composites.
// Evaluated samples are appended to `samples` / `points` when given.
template <typename T, typename FieldFn>
RenderOutput<T> render_ray(const Ray& ray, const Aabb& aabb,
                           const IndicatorGrid* grid,
                           const RenderSettings& settings, FieldFn&& field,
                           std::vector<SampleRadiance<T>>* samples = nullptr,
                           std::vector<SamplePoint>* points = nullptr) {
  thread_local std::vector<SampleRadiance<T>> local;
  std::vector<SampleRadiance<T>>& rad = samples ? *samples : local;
  rad.clear();
  if (points) points->clear();
  RayMarcher marcher(grid, ray, aabb, settings.steps, settings.t_min);
  double trans = 1.0;
  while (auto p = marcher.next(trans)) {
    const FieldOutput<T> f = field(*p);
    if (!std::isfinite(static_cast<double>(f.sigma)) ||
        !std::isfinite(static_cast<double>(f.rgb[0] + f.rgb[1] + f.rgb[2]))) {
      throw NumericalError("non-finite field output while rendering");
    }
    rad.push_back({f.sigma, f.rgb, static_cast<T>(p->delta), static_cast<T>(p->t)});
    if (points) points->push_back(*p);
    trans *= std::exp(-static_cast<double>(f.sigma) * p->delta);
  }
  RenderOutput<T> out = composite<T>(rad);
  if (settings.normalize_depth) {
    out.depth = out.opacity > T(0) ? out.depth_raw / std::max(out.opacity, T(1e-10))
                                   : T(0);
  }
  return out;
}

// Samples per field batch in render_ray_chunked.
inline constexpr std::size_t kRayChunk = 32;

// Same result as render_ray, but the field is evaluated on up to kRayChunk
// marched points at a time: `eval(points, chunk_index)` returns one
// FieldOutput per point. Points marched past the early-termination sample are
// evaluated but not composited.
template <typename T, typename ChunkFn>
RenderOutput<T> render_ray_chunked(const Ray& ray, const Aabb& aabb,
                                   const IndicatorGrid* grid,
                                   const RenderSettings& settings,
                                   ChunkFn&& eval,
                                   std::vector<SampleRadiance<T>>* samples = nullptr,
                                   std::vector<std::size_t>* chunk_sizes = nullptr) {
  thread_local std::vector<SampleRadiance<T>> local;
  thread_local std::vector<SamplePoint> batch;
  std::vector<SampleRadiance<T>>& rad = samples ? *samples : local;
  rad.clear();
  if (chunk_sizes) chunk_sizes->clear();
  RayMarcher marcher(grid, ray, aabb, settings.steps, settings.t_min);
  double trans = 1.0;
  for (std::size_t chunk = 0;; ++chunk) {
    batch.clear();
    while (batch.size() < kRayChunk) {
      auto p = marcher.next(trans);
      if (!p) break;
      batch.push_back(*p);
    }
    if (batch.empty()) break;
    if (chunk_sizes) chunk_sizes->push_back(batch.size());
    const std::span<const FieldOutput<T>> f =
        eval(std::span<const SamplePoint>(batch), chunk);
    bool stopped = false;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (i > 0 && trans < settings.t_min) {
        stopped = true;
        break;
      }
      const SamplePoint& p = batch[i];
      if (!std::isfinite(static_cast<double>(f[i].sigma)) ||
          !std::isfinite(static_cast<double>(f[i].rgb[0] + f[i].rgb[1] + f[i].rgb[2]))) {
        throw NumericalError("non-finite field output while rendering");
      }
      rad.push_back({f[i].sigma, f[i].rgb, static_cast<T>(p.delta), static_cast<T>(p.t)});
      trans *= std::exp(-static_cast<double>(f[i].sigma) * p.delta);
    }
    if (stopped || batch.size() < kRayChunk) break;
  }
  RenderOutput<T> out = composite<T>(rad);
  if (settings.normalize_depth) {
    out.depth = out.opacity > T(0) ? out.depth_raw / std::max(out.opacity, T(1e-10))
                                   : T(0);
  }
  return out;
}

}  // namespace forplane
