// SPDX-License-Identifier: Apache-2.0
//
// Training objectives. Every term is a mean, so the weights do not depend on
// batch size or plane resolution. Gradient outputs are accumulated (+=) and
// may be skipped by passing empty spans / null buffers.
#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "forplane/common.hpp"
#include "forplane/plane_field.hpp"

namespace forplane {

enum class DepthMode { Stereo, Monocular, None };

DepthMode parse_depth_mode(const std::string& s);
std::string to_string(DepthMode m);

struct LossWeights {
  double lambda_d = 1.0;
  double lambda_tv = 0.001;
  double lambda_ts = 0.05;
  double lambda_de = 0.001;
  DepthMode depth_mode = DepthMode::Stereo;
  double huber_delta = 0.2;
};

// mean_r |pred_r - gt_r|^2
template <typename T>
T rgb_loss(std::span<const Rgb<T>> pred, std::span<const Rgb<T>> gt,
           std::span<Rgb<T>> grad = {}, T scale = T(1)) {
  if (pred.size() != gt.size()) throw UsageError("rgb_loss batch mismatch");
  if (pred.empty()) return T(0);
  const T inv = T(1) / static_cast<T>(pred.size());
  T sum = T(0);
  for (std::size_t r = 0; r < pred.size(); ++r) {
    for (int c = 0; c < 3; ++c) {
      const T d = pred[r][c] - gt[r][c];
      sum += d * d;
      if (!grad.empty()) grad[r][c] += scale * T(2) * d * inv;
    }
  }
  return sum * inv;
}

template <typename T>
T huber(T r, T delta) {
  const T a = std::abs(r);
  return a <= delta ? T(0.5) * r * r : delta * (a - T(0.5) * delta);
}

template <typename T>
T huber_slope(T r, T delta) {
  if (r > delta) return delta;
  if (r < -delta) return -delta;
  return r;
}

// Mean Huber over rays with valid ground truth (gt > 0).
template <typename T>
T depth_loss(std::span<const T> pred, std::span<const T> gt, T delta,
             std::span<T> grad = {}, T scale = T(1)) {
  if (pred.size() != gt.size()) throw UsageError("depth_loss batch mismatch");
  if (!(delta > T(0))) throw UsageError("huber delta must be > 0");
  std::size_t valid = 0;
  for (T g : gt) valid += g > T(0);
  if (valid == 0) return T(0);
  const T inv = T(1) / static_cast<T>(valid);
  T sum = T(0);
  for (std::size_t r = 0; r < pred.size(); ++r) {
    if (!(gt[r] > T(0))) continue;
    const T res = pred[r] - gt[r];
    sum += huber(res, delta);
    if (!grad.empty()) grad[r] += scale * huber_slope(res, delta) * inv;
  }
  return sum * inv;
}

// Static planes: per plane, mean squared neighbor difference along the first
// axis plus the same along the second; averaged over planes.
template <typename T>
T tv_loss(const PlaneSet<T>& set, PlaneGrads<T>* grads = nullptr,
          T scale = T(1)) {
  std::size_t count = 0;
  for (const auto& p : set.planes()) count += !is_space_time(p.axes);
  const T per_plane = T(1) / static_cast<T>(count);
  T total = T(0);
  for (std::size_t k = 0; k < set.planes().size(); ++k) {
    const auto& p = set.planes()[k];
    if (is_space_time(p.axes)) continue;
    const T inv_a = T(1) / static_cast<T>((p.res_a - 1) * p.res_b * p.dim);
    const T inv_b = T(1) / static_cast<T>(p.res_a * (p.res_b - 1) * p.dim);
    T* g = grads ? grads->planes[k].data() : nullptr;
    T sa = T(0), sb = T(0);
    for (int i = 0; i < p.res_a; ++i) {
      for (int j = 0; j < p.res_b; ++j) {
        const std::size_t o = p.node_offset(i, j);
        for (int d = 0; d < p.dim; ++d) {
          if (i + 1 < p.res_a) {
            const std::size_t n = p.node_offset(i + 1, j);
            const T diff = p.values[n + d] - p.values[o + d];
            sa += diff * diff;
            if (g) {
              const T s = scale * per_plane * T(2) * diff * inv_a;
              g[n + d] += s;
              g[o + d] -= s;
            }
          }
          if (j + 1 < p.res_b) {
            const std::size_t n = p.node_offset(i, j + 1);
            const T diff = p.values[n + d] - p.values[o + d];
            sb += diff * diff;
            if (g) {
              const T s = scale * per_plane * T(2) * diff * inv_b;
              g[n + d] += s;
              g[o + d] -= s;
            }
          }
        }
      }
    }
    total += sa * inv_a + sb * inv_b;
  }
  return total * per_plane;
}

// Dynamic planes: per plane, mean squared difference along the time axis;
// averaged over planes.
template <typename T>
T time_smoothness_loss(const PlaneSet<T>& set, PlaneGrads<T>* grads = nullptr,
                       T scale = T(1)) {
  std::size_t count = 0;
  for (const auto& p : set.planes()) count += is_space_time(p.axes);
  const T per_plane = T(1) / static_cast<T>(count);
  T total = T(0);
  for (std::size_t k = 0; k < set.planes().size(); ++k) {
    const auto& p = set.planes()[k];
    if (!is_space_time(p.axes)) continue;
    const T inv = T(1) / static_cast<T>(p.res_a * (p.res_b - 1) * p.dim);
    T* g = grads ? grads->planes[k].data() : nullptr;
    T s = T(0);
    for (int i = 0; i < p.res_a; ++i) {
      for (int j = 0; j + 1 < p.res_b; ++j) {
        const std::size_t o = p.node_offset(i, j);
        const std::size_t n = p.node_offset(i, j + 1);
        for (int d = 0; d < p.dim; ++d) {
          const T diff = p.values[n + d] - p.values[o + d];
          s += diff * diff;
          if (g) {
            const T gs = scale * per_plane * T(2) * diff * inv;
            g[n + d] += gs;
            g[o + d] -= gs;
          }
        }
      }
    }
    total += s * inv;
  }
  return total * per_plane;
}

// Mean over every dynamic-plane entry of |1 - g|.
template <typename T>
T disentangle_loss(const PlaneSet<T>& set, PlaneGrads<T>* grads = nullptr,
                   T scale = T(1)) {
  std::size_t n = 0;
  for (const auto& p : set.planes()) {
    if (is_space_time(p.axes)) n += p.size();
  }
  const T inv = T(1) / static_cast<T>(n);
  T sum = T(0);
  for (std::size_t k = 0; k < set.planes().size(); ++k) {
    const auto& p = set.planes()[k];
    if (!is_space_time(p.axes)) continue;
    T* g = grads ? grads->planes[k].data() : nullptr;
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      const T v = p.values[i];
      sum += std::abs(T(1) - v);
      if (g) {
        const T sign = v > T(1) ? T(1) : (v < T(1) ? T(-1) : T(0));
        g[i] += scale * sign * inv;
      }
    }
  }
  return sum * inv;
}

// Mean |1 - g| over dynamic planes, without gradients.
template <typename T>
double mean_dynamic_deviation(const PlaneSet<T>& set) {
  return static_cast<double>(disentangle_loss(set));
}

template <typename T>
struct MonoAlignment {
  T eta = T(0);
  T eps = T(0);
  bool degenerate = false;
};

// Least-squares scale and shift: argmin_{eta, eps} |eta pred + eps - mono|^2.
template <typename T>
MonoAlignment<T> mono_align(std::span<const T> pred, std::span<const T> mono) {
  if (pred.size() != mono.size()) throw UsageError("mono_align batch mismatch");
  MonoAlignment<T> a;
  if (pred.empty()) {
    a.degenerate = true;
    return a;
  }
  const T n = static_cast<T>(pred.size());
  T mx = T(0), my = T(0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    mx += pred[i];
    my += mono[i];
  }
  mx /= n;
  my /= n;
  T sxx = T(0), sxy = T(0), sqx = T(0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T dx = pred[i] - mx;
    sxx += dx * dx;
    sxy += dx * (mono[i] - my);
    sqx += pred[i] * pred[i];
  }
  if (!(sxx > T(1e-12) * std::max(sqx, T(1e-30)))) {
    a.eta = T(0);
    a.eps = my;
    a.degenerate = true;
    return a;
  }
  a.eta = sxy / sxx;
  a.eps = my - a.eta * mx;
  return a;
}

// Mean squared residual after scale-shift alignment, over rays whose
// monocular depth is valid (> 0). The alignment is held fixed in the
// gradient, which is exact at the least-squares optimum.
template <typename T>
T mono_loss(std::span<const T> pred, std::span<const T> mono,
            std::span<T> grad = {}, T scale = T(1),
            MonoAlignment<T>* alignment = nullptr) {
  if (pred.size() != mono.size()) throw UsageError("mono_loss batch mismatch");
  std::vector<T> x, y;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (mono[i] > T(0)) {
      x.push_back(pred[i]);
      y.push_back(mono[i]);
      idx.push_back(i);
    }
  }
  if (x.empty()) return T(0);
  const MonoAlignment<T> a = mono_align<T>(x, y);
  if (alignment) *alignment = a;
  const T inv = T(1) / static_cast<T>(x.size());
  T sum = T(0);
  for (std::size_t k = 0; k < x.size(); ++k) {
    const T r = a.eta * x[k] + a.eps - y[k];
    sum += r * r;
    if (!grad.empty()) grad[idx[k]] += scale * T(2) * a.eta * r * inv;
  }
  return sum * inv;
}

template <typename T>
struct LossTerms {
  T rgb = T(0);
  T depth = T(0);  // Huber or monocular term, per depth_mode
  T tv = T(0);
  T ts = T(0);
  T de = T(0);
  T total = T(0);
};

// L_rgb + lambda_d L_depth + lambda_tv L_TV + lambda_ts L_TS + lambda_de L_DE.
// Ray gradients accumulate into d_rgb / d_depth, plane gradients into
// `plane_grads` (all optional).
template <typename T>
LossTerms<T> total_loss(const LossWeights& w, std::span<const Rgb<T>> pred_rgb,
                        std::span<const Rgb<T>> gt_rgb,
                        std::span<const T> pred_depth,
                        std::span<const T> gt_depth, const PlaneSet<T>& planes,
                        std::span<Rgb<T>> d_rgb = {}, std::span<T> d_depth = {},
                        PlaneGrads<T>* plane_grads = nullptr) {
  LossTerms<T> t;
  t.rgb = rgb_loss<T>(pred_rgb, gt_rgb, d_rgb);
  const T ld = static_cast<T>(w.lambda_d);
  switch (w.depth_mode) {
    case DepthMode::Stereo:
      t.depth = depth_loss<T>(pred_depth, gt_depth,
                              static_cast<T>(w.huber_delta), d_depth, ld);
      break;
    case DepthMode::Monocular:
      t.depth = mono_loss<T>(pred_depth, gt_depth, d_depth, ld);
      break;
    case DepthMode::None: break;
  }
  t.tv = tv_loss(planes, plane_grads, static_cast<T>(w.lambda_tv));
  t.ts = time_smoothness_loss(planes, plane_grads, static_cast<T>(w.lambda_ts));
  t.de = disentangle_loss(planes, plane_grads, static_cast<T>(w.lambda_de));
  t.total = t.rgb + ld * t.depth + static_cast<T>(w.lambda_tv) * t.tv +
            static_cast<T>(w.lambda_ts) * t.ts +
            static_cast<T>(w.lambda_de) * t.de;
  return t;
}

}  // namespace forplane
