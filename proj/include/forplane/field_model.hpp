// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>
#include <span>
#include <vector>

#include "forplane/encoding.hpp"
#include "forplane/field_mlp.hpp"
#include "forplane/plane_field.hpp"
#include "forplane/renderer.hpp"

namespace forplane {

struct FieldConfig {
  PlaneSetConfig planes;
  EncodingConfig encoding;
  int hidden_features = 15;
  bool large_mlp = false;
  double static_init_lo = 0.9;
  double static_init_hi = 1.1;
  // Dynamic planes start at exactly 1 unless random init is requested (the
  // no-disentangle comparison).
  bool dynamic_random_init = false;
};

template <typename T>
struct FieldModel {
  PlaneSet<T> planes;
  MlpParams<T> mlp;
  EncodingConfig encoding;

  FieldModel() = default;
  explicit FieldModel(const FieldConfig& cfg)
      : planes(cfg.planes), encoding(cfg.encoding) {
    const int in = cfg.encoding.width() + planes.feature_width();
    mlp = MlpParams<T>(cfg.large_mlp ? MlpShape::large(in, cfg.hidden_features)
                                     : MlpShape::tiny(in, cfg.hidden_features));
  }

  template <typename Rng>
  void init(const FieldConfig& cfg, Rng& rng) {
    planes.init_uniform(FieldPart::Static, rng, cfg.static_init_lo,
                        cfg.static_init_hi);
    if (cfg.dynamic_random_init) {
      planes.init_uniform(FieldPart::Dynamic, rng, cfg.static_init_lo,
                          cfg.static_init_hi);
    } else {
      planes.fill(FieldPart::Dynamic, T(1));
    }
    mlp.init(rng);
  }
};

template <typename T>
struct FieldGrads {
  PlaneGrads<T> planes;
  MlpParams<T> mlp;

  FieldGrads() = default;
  explicit FieldGrads(const FieldModel<T>& m)
      : planes(m.planes), mlp(zeros_like(m.mlp)) {}
  void zero() {
    planes.zero();
    mlp.zero();
  }
  void add(const FieldGrads& o) {
    planes.add(o.planes);
    mlp.add(o.mlp);
  }
};

template <typename T>
struct PointCache {
  FusionCache<T> fusion;
  MlpCache<T> mlp;
  std::vector<T> input;
  std::vector<T> d_input;
};

// Records of one evaluate_batch call.
template <typename T>
struct BatchCache {
  std::vector<FusionCache<T>> fusion;
  MlpBatchCache<T> mlp;
  std::vector<FieldOutput<T>> out;
  std::vector<T> d_sigma;
  std::vector<Rgb<T>> d_rgb;
};

// A frozen, read-only view of the field used for queries.
template <typename T>
struct FieldQuery {
  PlaneView<T> view;
  const MlpParams<T>* mlp = nullptr;
  const EncodingConfig* encoding = nullptr;

  static FieldQuery of(const FieldModel<T>& m) {
    return FieldQuery{full_view(m.planes), &m.mlp, &m.encoding};
  }
  static FieldQuery of(const FieldModel<T>& m, const PlaneView<T>& v) {
    return FieldQuery{v, &m.mlp, &m.encoding};
  }

  FieldOutput<T> evaluate(const SamplePoint& p, const Vec3& dir,
                          PointCache<T>& cache) const {
    const int enc = encoding->width();
    cache.input.resize(mlp->shape.input_dim);
    std::span<T> in(cache.input);
    encode_input<T>(*encoding, p.coords, dir, in.first(enc));
    fuse_features(view, p.coords, in.subspan(enc), &cache.fusion);
    return mlp_forward(*mlp, std::span<const T>(cache.input), cache.mlp);
  }

  FieldOutput<T> evaluate(const SamplePoint& p, const Vec3& dir) const {
    thread_local PointCache<T> scratch;
    return evaluate(p, dir, scratch);
  }

  // Evaluates all `points`; fusion records are kept only when `keep` is set
  // (needed by backward_batch).
  std::span<const FieldOutput<T>> evaluate_batch(
      std::span<const SamplePoint> points, const Vec3& dir, BatchCache<T>& c,
      bool keep) const {
    const int enc = encoding->width();
    const int width = mlp->shape.input_dim;
    const auto n = static_cast<Eigen::Index>(points.size());
    c.mlp.sigma_inputs.resize(mlp->sigma_net.size());
    RowMat<T>& x = c.mlp.sigma_inputs[0];
    x.resize(n, width);
    if (keep && c.fusion.size() < points.size()) c.fusion.resize(points.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      std::span<T> in(x.row(i).data(), width);
      encode_input<T>(*encoding, points[i].coords, dir, in.first(enc));
      fuse_features(view, points[i].coords, in.subspan(enc),
                    keep ? &c.fusion[i] : nullptr);
    }
    if (!x.allFinite()) {
      throw NumericalError("non-finite MLP input (corrupted upstream state)");
    }
    c.out.resize(points.size());
    mlp_forward_batch(*mlp, c.mlp, std::span<FieldOutput<T>>(c.out));
    return c.out;
  }

  // Backward of the last keep=true evaluate_batch; c.d_sigma / c.d_rgb hold
  // the upstream gradients, one entry per point.
  void backward_batch(BatchCache<T>& c, FieldGrads<T>& grads) const {
    mlp_backward_batch(*mlp, c.mlp, std::span<const T>(c.d_sigma),
                       std::span<const Rgb<T>>(c.d_rgb), grads.mlp);
    const int enc = encoding->width();
    const int feat = mlp->shape.input_dim - enc;
    for (Eigen::Index i = 0; i < c.mlp.d_in.rows(); ++i) {
      fuse_backward(view, c.fusion[i],
                    std::span<const T>(c.mlp.d_in.row(i).data() + enc, feat),
                    grads.planes);
    }
  }

  T density(const std::array<double, 4>& coords) const {
    SamplePoint p;
    p.coords = coords;
    return evaluate(p, Vec3::UnitZ()).sigma;
  }

  void backward(PointCache<T>& cache, T d_sigma, const Rgb<T>& d_rgb,
                FieldGrads<T>& grads) const {
    mlp_backward(*mlp, cache.mlp, d_sigma, d_rgb, grads.mlp, cache.d_input);
    const int enc = encoding->width();
    fuse_backward(view, cache.fusion,
                  std::span<const T>(cache.d_input).subspan(enc), grads.planes);
  }
};

// Renders one ray with batched field evaluation.
template <typename T>
RenderOutput<T> render_ray_field(const FieldQuery<T>& q, const Ray& ray,
                                 const Aabb& aabb, const IndicatorGrid* grid,
                                 const RenderSettings& settings) {
  thread_local BatchCache<T> scratch;
  return render_ray_chunked<T>(
      ray, aabb, grid, settings,
      [&](std::span<const SamplePoint> pts, std::size_t) {
        return q.evaluate_batch(pts, ray.dir, scratch, false);
      });
}

// Per-ray record for training: one batch cache per evaluated chunk.
template <typename T>
struct RayWorkspace {
  std::vector<BatchCache<T>> chunks;
  std::vector<std::size_t> chunk_sizes;
  std::vector<SampleRadiance<T>> samples;
  CompositeCache<T> composite;
  std::vector<SampleGrad<T>> sample_grads;
};

template <typename T>
RenderOutput<T> render_ray_train(const FieldQuery<T>& q, const Ray& ray,
                                 const Aabb& aabb, const IndicatorGrid* grid,
                                 const RenderSettings& settings,
                                 RayWorkspace<T>& ws) {
  auto eval = [&](std::span<const SamplePoint> pts, std::size_t chunk) {
    if (ws.chunks.size() <= chunk) ws.chunks.resize(chunk + 1);
    return q.evaluate_batch(pts, ray.dir, ws.chunks[chunk], true);
  };
  RenderOutput<T> out = render_ray_chunked<T>(ray, aabb, grid, settings, eval,
                                              &ws.samples, &ws.chunk_sizes);
  composite<T>(ws.samples, &ws.composite);
  return out;
}

// Backpropagates d(loss)/d(rgb) and d(loss)/d(reported depth) of one ray
// rendered by render_ray_train into `grads`.
template <typename T>
void ray_backward(const FieldQuery<T>& q, const RenderOutput<T>& out,
                  const RenderSettings& settings, RayWorkspace<T>& ws,
                  const Rgb<T>& d_rgb, T d_depth, FieldGrads<T>& grads) {
  T d_raw = T(0), d_op = T(0);
  depth_grad(out, settings, d_depth, d_raw, d_op);
  ws.sample_grads.resize(ws.samples.size());
  composite_backward<T>(ws.samples, ws.composite, d_rgb, d_raw, d_op,
                        ws.sample_grads);
  std::size_t first = 0;
  for (std::size_t c = 0; c < ws.chunk_sizes.size(); ++c) {
    BatchCache<T>& bc = ws.chunks[c];
    const std::size_t n = ws.chunk_sizes[c];
    bc.d_sigma.assign(n, T(0));
    bc.d_rgb.assign(n, Rgb<T>{});
    // Points past early termination were never composited; they keep zero
    // upstream gradient.
    for (std::size_t i = 0; i < n && first + i < ws.sample_grads.size(); ++i) {
      bc.d_sigma[i] = ws.sample_grads[first + i].d_sigma;
      bc.d_rgb[i] = ws.sample_grads[first + i].d_rgb;
    }
    q.backward_batch(bc, grads);
    first += n;
  }
}

}  // namespace forplane
