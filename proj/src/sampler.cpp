// SPDX-License-Identifier: Apache-2.0
#include "forplane/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "forplane/common.hpp"

namespace forplane {

SamplerKind parse_sampler_kind(const std::string& s) {
  if (s == "spatiotemporal") return SamplerKind::Spatiotemporal;
  if (s == "naive") return SamplerKind::Naive;
  if (s == "endonerf") return SamplerKind::EndoNerf;
  throw UsageError("unknown sampler kind '" + s + "'");
}

std::string to_string(SamplerKind k) {
  switch (k) {
    case SamplerKind::Spatiotemporal: return "spatiotemporal";
    case SamplerKind::Naive: return "naive";
    case SamplerKind::EndoNerf: return "endonerf";
  }
  return "?";
}

void MaskStack::validate() const {
  if (masks.empty()) throw DataError("mask stack is empty");
  if (!images.empty() && images.size() != masks.size()) {
    throw DataError("mask stack: image and mask counts differ");
  }
  const Image& ref = masks.front();
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (masks[i].width != ref.width || masks[i].height != ref.height ||
        masks[i].channels != 1) {
      throw DataError("mask stack: mask " + std::to_string(i) + " has a different shape");
    }
    if (!images.empty() && (images[i].width != ref.width ||
                            images[i].height != ref.height ||
                            images[i].channels != 3)) {
      throw DataError("mask stack: image " + std::to_string(i) + " has a different shape");
    }
  }
}

WeightMaps::WeightMaps(std::vector<Image> maps, SamplerConfig cfg)
    : maps_(std::move(maps)), cfg_(cfg) {
  if (maps_.empty()) throw DataError("no weight maps");
  width_ = maps_.front().width;
  height_ = maps_.front().height;
  const std::size_t per = maps_.front().pixels();
  cdf_.resize(per * maps_.size());
  double acc = 0.0;
  for (std::size_t f = 0; f < maps_.size(); ++f) {
    for (std::size_t p = 0; p < per; ++p) {
      const double w = maps_[f].data[p];
      if (!(w >= 0.0) || !std::isfinite(w)) {
        throw NumericalError("weight map has a negative or non-finite entry");
      }
      acc += w;
      cdf_[f * per + p] = acc;
    }
  }
  if (!(acc > 0.0)) {
    throw DataError("every pixel is tool-occluded in every frame; nothing to sample");
  }
  total_ = acc;
  for (double& c : cdf_) c /= acc;
  // Force the last positive-weight entry (and everything after it) to 1.
  for (std::size_t i = cdf_.size(); i-- > 0;) {
    const double prev = i == 0 ? 0.0 : cdf_[i - 1];
    const bool positive = cdf_[i] > prev;
    cdf_[i] = 1.0;
    if (positive) break;
  }
}

double WeightMaps::probability(std::size_t frame, int row, int col) const {
  return maps_[frame].at(row, col) / total_;
}

PixelDraw WeightMaps::draw(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  // First entry with cdf > x; zero-weight entries repeat the previous value
  // and can never be selected.
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), x);
  if (it == cdf_.end()) --it;
  const std::size_t idx = static_cast<std::size_t>(it - cdf_.begin());
  const std::size_t per = static_cast<std::size_t>(width_) * height_;
  PixelDraw d;
  d.frame = static_cast<std::uint32_t>(idx / per);
  const std::size_t p = idx % per;
  d.row = static_cast<int>(p / width_);
  d.col = static_cast<int>(p % width_);
  return d;
}

std::vector<PixelDraw> WeightMaps::draw_batch(std::mt19937_64& rng,
                                              std::size_t batch_size) const {
  if (batch_size < 1) throw UsageError("batch size must be >= 1");
  std::vector<PixelDraw> out(batch_size);
  for (auto& d : out) d = draw(rng);
  return out;
}

std::vector<Image> occlusion_scaling(const MaskStack& stack, double beta) {
  stack.validate();
  const std::size_t frames = stack.frames();
  const Image& ref = stack.masks.front();
  std::vector<double> visible(ref.pixels(), 0.0);
  for (const auto& m : stack.masks) {
    for (std::size_t p = 0; p < m.pixels(); ++p) visible[p] += m.data[p];
  }
  std::vector<Image> out;
  out.reserve(frames);
  for (const auto& m : stack.masks) {
    Image o(m.width, m.height, 1);
    for (std::size_t p = 0; p < m.pixels(); ++p) {
      o.data[p] = static_cast<float>(beta * frames * m.data[p] /
                                     std::max(visible[p], 1.0));
    }
    out.push_back(std::move(o));
  }
  return out;
}

Image temporal_difference(const MaskStack& stack, std::size_t frame, int n) {
  stack.validate();
  if (stack.images.empty()) throw DataError("temporal difference needs images");
  const Image& mi = stack.masks[frame];
  const Image& ii = stack.images[frame];
  Image out(mi.width, mi.height, 1, 0.0f);
  const long lo = std::max<long>(0, static_cast<long>(frame) - n + 1);
  const long hi = std::min<long>(static_cast<long>(stack.frames()) - 1,
                                 static_cast<long>(frame) + n - 1);
  for (long j = lo; j <= hi; ++j) {
    if (j == static_cast<long>(frame)) continue;
    const Image& mj = stack.masks[j];
    const Image& ij = stack.images[j];
    for (std::size_t p = 0; p < mi.pixels(); ++p) {
      double s = 0.0;
      for (int c = 0; c < 3; ++c) {
        s += std::abs(ii.data[3 * p + c] * mi.data[p] - ij.data[3 * p + c] * mj.data[p]);
      }
      out.data[p] = std::max(out.data[p], static_cast<float>(s / 3.0));
    }
  }
  return out;
}

WeightMaps build_weight_maps(const MaskStack& stack, const SamplerConfig& cfg) {
  if (!(cfg.alpha > 0.0) || !(cfg.beta > 0.0) || cfg.window < 1) {
    throw UsageError("sampler needs alpha > 0, beta > 0, window >= 1");
  }
  std::vector<Image> maps = occlusion_scaling(stack, cfg.beta);
  for (std::size_t f = 0; f < maps.size(); ++f) {
    const Image diff = temporal_difference(stack, f, cfg.window);
    for (std::size_t p = 0; p < diff.pixels(); ++p) {
      maps[f].data[p] = static_cast<float>(
          std::max(static_cast<double>(diff.data[p]), cfg.alpha) * maps[f].data[p]);
    }
  }
  SamplerConfig c = cfg;
  c.kind = SamplerKind::Spatiotemporal;
  return WeightMaps(std::move(maps), c);
}

WeightMaps naive_weight_maps(const MaskStack& stack) {
  stack.validate();
  SamplerConfig c;
  c.kind = SamplerKind::Naive;
  return WeightMaps(stack.masks, c);
}

WeightMaps endonerf_weight_maps(const MaskStack& stack, double beta) {
  SamplerConfig c;
  c.kind = SamplerKind::EndoNerf;
  c.beta = beta;
  return WeightMaps(occlusion_scaling(stack, beta), c);
}

WeightMaps make_weight_maps(const MaskStack& stack, const SamplerConfig& cfg) {
  switch (cfg.kind) {
    case SamplerKind::Spatiotemporal: return build_weight_maps(stack, cfg);
    case SamplerKind::Naive: return naive_weight_maps(stack);
    case SamplerKind::EndoNerf: return endonerf_weight_maps(stack, cfg.beta);
  }
  throw UsageError("unknown sampler kind");
}

Image weight_heatmap(const Image& map) {
  float peak = 0.0f;
  for (float v : map.data) peak = std::max(peak, v);
  Image out(map.width, map.height, 1);
  for (std::size_t p = 0; p < map.data.size(); ++p) {
    out.data[p] = peak > 0.0f ? map.data[p] / peak : 0.0f;
  }
  return out;
}

}  // namespace forplane
