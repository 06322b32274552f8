// SPDX-License-Identifier: Apache-2.0
//
// Tiny decoder: sigma net (ReLU hidden layers, linear head emitting raw
// density plus H hidden features) followed by a color net (ReLU hidden
// layers, linear head emitting three raw channels). Density goes through
// softplus, color through the logistic function.
#pragma once

#include <array>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "forplane/common.hpp"

namespace forplane {

struct MlpShape {
  int input_dim = 0;
  int hidden_features = 15;
  int sigma_layers = 1;
  int sigma_width = 64;
  int color_layers = 1;
  int color_width = 64;

  static MlpShape tiny(int input_dim, int hidden_features = 15) {
    return MlpShape{input_dim, hidden_features, 1, 64, 1, 64};
  }
  // Eight ReLU layers of 256 channels in total, for the large-decoder
  // comparison.
  static MlpShape large(int input_dim, int hidden_features = 15) {
    return MlpShape{input_dim, hidden_features, 7, 256, 1, 256};
  }
};

template <typename T>
struct Dense {
  int in = 0;
  int out = 0;
  std::vector<T> weight;  // out x in, row-major
  std::vector<T> bias;

  Dense() = default;
  Dense(int i, int o)
      : in(i), out(o), weight(static_cast<std::size_t>(i) * o, T(0)),
        bias(o, T(0)) {}
};

template <typename T>
struct FieldOutput {
  T sigma = T(0);
  Rgb<T> rgb{};
};

// Parameters, and (zero-initialized) the matching gradient buffers.
template <typename T>
struct MlpParams {
  MlpShape shape;
  std::vector<Dense<T>> sigma_net;  // hidden layers then head
  std::vector<Dense<T>> color_net;

  MlpParams() = default;
  explicit MlpParams(const MlpShape& s) : shape(s) {
    if (s.input_dim < 1 || s.hidden_features < 0 || s.sigma_layers < 1 ||
        s.color_layers < 1) {
      throw UsageError("invalid MLP shape");
    }
    int in = s.input_dim;
    for (int l = 0; l < s.sigma_layers; ++l) {
      sigma_net.emplace_back(in, s.sigma_width);
      in = s.sigma_width;
    }
    sigma_net.emplace_back(in, 1 + s.hidden_features);
    in = s.hidden_features;
    for (int l = 0; l < s.color_layers; ++l) {
      color_net.emplace_back(in, s.color_width);
      in = s.color_width;
    }
    color_net.emplace_back(in, 3);
  }

  // Scaled-uniform weights in [-a, a], a = sqrt(6 / (fan_in + fan_out));
  // zero biases.
  template <typename Rng>
  void init(Rng& rng) {
    for (Dense<T>* layer : layers()) {
      const double a = std::sqrt(6.0 / (layer->in + layer->out));
      std::uniform_real_distribution<double> dist(-a, a);
      for (auto& w : layer->weight) w = static_cast<T>(dist(rng));
      std::fill(layer->bias.begin(), layer->bias.end(), T(0));
    }
  }

  // Serialization order: sigma net layers then color net layers, each
  // layer as weight (row-major) then bias.
  std::vector<Dense<T>*> layers() {
    std::vector<Dense<T>*> out;
    for (auto& l : sigma_net) out.push_back(&l);
    for (auto& l : color_net) out.push_back(&l);
    return out;
  }
  std::vector<const Dense<T>*> layers() const {
    std::vector<const Dense<T>*> out;
    for (const auto& l : sigma_net) out.push_back(&l);
    for (const auto& l : color_net) out.push_back(&l);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Dense<T>* l : layers()) n += l->weight.size() + l->bias.size();
    return n;
  }

  void zero() {
    for (Dense<T>* l : layers()) {
      std::fill(l->weight.begin(), l->weight.end(), T(0));
      std::fill(l->bias.begin(), l->bias.end(), T(0));
    }
  }

  void add(const MlpParams& other) {
    auto a = layers();
    auto b = other.layers();
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t k = 0; k < a[i]->weight.size(); ++k) {
        a[i]->weight[k] += b[i]->weight[k];
      }
      for (std::size_t k = 0; k < a[i]->bias.size(); ++k) {
        a[i]->bias[k] += b[i]->bias[k];
      }
    }
  }
};

template <typename T>
MlpParams<T> zeros_like(const MlpParams<T>& p) {
  return MlpParams<T>(p.shape);
}

// Activations kept for the backward pass. inputs[l] is the input of layer l,
// pre[l] its pre-activation (hidden layers only).
template <typename T>
struct MlpCache {
  std::vector<std::vector<T>> sigma_inputs, sigma_pre;
  std::vector<std::vector<T>> color_inputs, color_pre;
  std::vector<T> sigma_head, color_head;
  T raw_sigma = T(0);
  Rgb<T> raw_rgb{};
  std::vector<T> d_head, d_color_in;  // backward workspace
};

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ColVec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

namespace detail {

template <typename T>
void dense_forward(const Dense<T>& layer, const T* in, T* out) {
  Eigen::Map<const RowMat<T>> w(layer.weight.data(), layer.out, layer.in);
  Eigen::Map<const ColVec<T>> x(in, layer.in);
  Eigen::Map<const ColVec<T>> b(layer.bias.data(), layer.out);
  Eigen::Map<ColVec<T>>(out, layer.out).noalias() = w * x + b;
}

// Accumulates dW, db for one layer and writes d(input) into `din`.
template <typename T>
void dense_backward(const Dense<T>& layer, const T* in, const T* dout,
                    Dense<T>& grad, T* din) {
  Eigen::Map<const RowMat<T>> w(layer.weight.data(), layer.out, layer.in);
  Eigen::Map<RowMat<T>> gw(grad.weight.data(), layer.out, layer.in);
  Eigen::Map<const ColVec<T>> x(in, layer.in);
  Eigen::Map<const ColVec<T>> g(dout, layer.out);
  gw.noalias() += g * x.transpose();
  Eigen::Map<ColVec<T>>(grad.bias.data(), layer.out) += g;
  Eigen::Map<ColVec<T>>(din, layer.in).noalias() = w.transpose() * g;
}

// Runs hidden ReLU layers then the linear head. Returns the head output.
template <typename T>
const std::vector<T>& run_net(const std::vector<Dense<T>>& net, const T* input,
                              std::vector<std::vector<T>>& inputs,
                              std::vector<std::vector<T>>& pre,
                              std::vector<T>& head_out) {
  const std::size_t hidden = net.size() - 1;
  inputs.resize(net.size());
  pre.resize(hidden);
  inputs[0].assign(input, input + net[0].in);
  for (std::size_t l = 0; l < hidden; ++l) {
    pre[l].resize(net[l].out);
    dense_forward(net[l], inputs[l].data(), pre[l].data());
    inputs[l + 1].resize(net[l].out);
    for (int o = 0; o < net[l].out; ++o) {
      inputs[l + 1][o] = pre[l][o] > T(0) ? pre[l][o] : T(0);
    }
  }
  head_out.resize(net.back().out);
  dense_forward(net.back(), inputs[hidden].data(), head_out.data());
  return head_out;
}

// Backward through one net. `g` holds d(head output) on entry and is used as
// workspace; d(net input) lands in `dinput`.
template <typename T>
void net_backward(const std::vector<Dense<T>>& net,
                  const std::vector<std::vector<T>>& inputs,
                  const std::vector<std::vector<T>>& pre,
                  std::vector<Dense<T>>& grads, std::vector<T>& g,
                  std::vector<T>& dinput) {
  for (std::size_t l = net.size(); l-- > 0;) {
    dinput.resize(net[l].in);
    dense_backward(net[l], inputs[l].data(), g.data(), grads[l],
                   dinput.data());
    if (l > 0) {
      const auto& z = pre[l - 1];
      g.resize(dinput.size());
      for (std::size_t k = 0; k < dinput.size(); ++k) {
        g[k] = z[k] > T(0) ? dinput[k] : T(0);  // dead ReLU units pass nothing
      }
    }
  }
}

}  // namespace detail

template <typename T>
FieldOutput<T> mlp_forward(const MlpParams<T>& params, std::span<const T> input,
                           MlpCache<T>& cache) {
  if (static_cast<int>(input.size()) != params.shape.input_dim) {
    throw UsageError("MLP input has wrong width");
  }
  for (T v : input) {
    if (!std::isfinite(v)) {
      throw NumericalError("non-finite MLP input (corrupted upstream state)");
    }
  }
  std::vector<T>& head = cache.sigma_head;
  detail::run_net(params.sigma_net, input.data(), cache.sigma_inputs,
                  cache.sigma_pre, head);
  FieldOutput<T> out;
  cache.raw_sigma = head[0];
  out.sigma = softplus(head[0]);
  std::vector<T>& color_head = cache.color_head;
  detail::run_net(params.color_net, head.data() + 1, cache.color_inputs,
                  cache.color_pre, color_head);
  for (int c = 0; c < 3; ++c) {
    cache.raw_rgb[c] = color_head[c];
    out.rgb[c] = logistic(color_head[c]);
  }
  return out;
}

template <typename T>
FieldOutput<T> mlp_forward(const MlpParams<T>& params,
                           std::span<const T> input) {
  MlpCache<T> cache;
  return mlp_forward(params, input, cache);
}

// Accumulates parameter gradients into `grads` and writes d(loss)/d(input).
template <typename T>
void mlp_backward(const MlpParams<T>& params, MlpCache<T>& cache, T d_sigma,
                  const Rgb<T>& d_rgb, MlpParams<T>& grads,
                  std::vector<T>& d_input) {
  std::vector<T>& g = cache.d_head;
  g.resize(3);
  for (int c = 0; c < 3; ++c) {
    const T s = logistic(cache.raw_rgb[c]);
    g[c] = d_rgb[c] * s * (T(1) - s);
  }
  std::vector<T>& d_color_in = cache.d_color_in;
  detail::net_backward(params.color_net, cache.color_inputs, cache.color_pre,
                       grads.color_net, g, d_color_in);
  g.resize(1 + params.shape.hidden_features);
  g[0] = d_sigma * logistic(cache.raw_sigma);  // softplus' = logistic
  for (int h = 0; h < params.shape.hidden_features; ++h) {
    g[1 + h] = d_color_in[h];
  }
  detail::net_backward(params.sigma_net, cache.sigma_inputs, cache.sigma_pre,
                       grads.sigma_net, g, d_input);
}

// Activations of a batch of inputs, one row per sample.
template <typename T>
struct MlpBatchCache {
  std::vector<RowMat<T>> sigma_inputs, sigma_pre;
  std::vector<RowMat<T>> color_inputs, color_pre;
  RowMat<T> sigma_head, color_head;
  RowMat<T> g, d_in;  // backward workspace
};

namespace detail {

template <typename T>
Eigen::Map<const RowMat<T>> weight_map(const Dense<T>& l) {
  return Eigen::Map<const RowMat<T>>(l.weight.data(), l.out, l.in);
}

template <typename T>
void run_net_batch(const std::vector<Dense<T>>& net,
                   std::vector<RowMat<T>>& inputs, std::vector<RowMat<T>>& pre,
                   RowMat<T>& head) {
  const std::size_t hidden = net.size() - 1;
  inputs.resize(net.size());
  pre.resize(hidden);
  for (std::size_t l = 0; l <= hidden; ++l) {
    const Dense<T>& layer = net[l];
    RowMat<T>& z = l < hidden ? pre[l] : head;
    z.noalias() = inputs[l] * weight_map(layer).transpose();
    z.rowwise() += Eigen::Map<const ColVec<T>>(layer.bias.data(), layer.out).transpose();
    if (l < hidden) inputs[l + 1] = z.cwiseMax(T(0));
  }
}

// `g` holds d(head) on entry; d(net input) lands in `dinput`.
template <typename T>
void net_backward_batch(const std::vector<Dense<T>>& net,
                        const std::vector<RowMat<T>>& inputs,
                        const std::vector<RowMat<T>>& pre,
                        std::vector<Dense<T>>& grads, RowMat<T>& g,
                        RowMat<T>& dinput) {
  for (std::size_t l = net.size(); l-- > 0;) {
    Dense<T>& gl = grads[l];
    Eigen::Map<RowMat<T>>(gl.weight.data(), gl.out, gl.in).noalias() +=
        g.transpose() * inputs[l];
    // Row-by-row so the summation order does not depend on buffer alignment.
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> gb(gl.bias.data(), gl.out);
    for (Eigen::Index i = 0; i < g.rows(); ++i) gb += g.row(i);
    dinput.noalias() = g * weight_map(net[l]);
    if (l > 0) g = (pre[l - 1].array() > T(0)).select(dinput, T(0));
  }
}

}  // namespace detail

// Batched forward. `input` has one row per sample; `cache.sigma_inputs[0]`
// is overwritten with it.
template <typename T>
void mlp_forward_batch(const MlpParams<T>& params, MlpBatchCache<T>& cache,
                       std::span<FieldOutput<T>> out) {
  const auto n = cache.sigma_inputs.empty() ? 0 : cache.sigma_inputs[0].rows();
  if (n == 0) return;
  if (cache.sigma_inputs[0].cols() != params.shape.input_dim) {
    throw UsageError("MLP input has wrong width");
  }
  detail::run_net_batch(params.sigma_net, cache.sigma_inputs, cache.sigma_pre,
                        cache.sigma_head);
  cache.color_inputs.resize(params.color_net.size());
  cache.color_inputs[0] = cache.sigma_head.rightCols(params.shape.hidden_features);
  detail::run_net_batch(params.color_net, cache.color_inputs, cache.color_pre,
                        cache.color_head);
  for (Eigen::Index i = 0; i < n; ++i) {
    out[i].sigma = softplus(cache.sigma_head(i, 0));
    for (int c = 0; c < 3; ++c) out[i].rgb[c] = logistic(cache.color_head(i, c));
  }
}

// Batched backward; d(loss)/d(input) rows land in `cache.d_in`.
template <typename T>
void mlp_backward_batch(const MlpParams<T>& params, MlpBatchCache<T>& cache,
                        std::span<const T> d_sigma,
                        std::span<const Rgb<T>> d_rgb, MlpParams<T>& grads) {
  const auto n = cache.sigma_head.rows();
  const int hf = params.shape.hidden_features;
  RowMat<T>& g = cache.g;
  g.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const T s = logistic(cache.color_head(i, c));
      g(i, c) = d_rgb[i][c] * s * (T(1) - s);
    }
  }
  detail::net_backward_batch(params.color_net, cache.color_inputs,
                             cache.color_pre, grads.color_net, g, cache.d_in);
  g.resize(n, 1 + hf);
  for (Eigen::Index i = 0; i < n; ++i) {
    g(i, 0) = d_sigma[i] * logistic(cache.sigma_head(i, 0));
  }
  g.rightCols(hf) = cache.d_in;
  detail::net_backward_batch(params.sigma_net, cache.sigma_inputs,
                             cache.sigma_pre, grads.sigma_net, g, cache.d_in);
}

}  // namespace forplane
