// SPDX-License-Identifier: Apache-2.0
//
// Per-frame pixel importance maps and inverse-CDF ray batch sampling.
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "forplane/image.hpp"

namespace forplane {

enum class SamplerKind { Spatiotemporal, Naive, EndoNerf };

SamplerKind parse_sampler_kind(const std::string& s);
std::string to_string(SamplerKind k);

struct SamplerConfig {
  SamplerKind kind = SamplerKind::Spatiotemporal;
  double alpha = 0.1;  // lower bound on the temporal difference
  double beta = 1.0;   // occlusion scaling
  int window = 25;     // temporal radius n
};

// Per-frame images (3 channels) and binary masks (1 = tissue, 0 = tool).
struct MaskStack {
  std::vector<Image> images;
  std::vector<Image> masks;

  std::size_t frames() const { return masks.size(); }
  void validate() const;
};

struct PixelDraw {
  std::uint32_t frame = 0;
  int row = 0;
  int col = 0;
};

class WeightMaps {
 public:
  WeightMaps() = default;
  // Throws DataError when every weight is zero.
  WeightMaps(std::vector<Image> maps, SamplerConfig cfg);

  const std::vector<Image>& maps() const { return maps_; }
  std::span<const double> cdf() const { return cdf_; }
  const SamplerConfig& config() const { return cfg_; }
  int width() const { return width_; }
  int height() const { return height_; }
  double total() const { return total_; }

  // Probability of drawing (frame, row, col): W / sum(W).
  double probability(std::size_t frame, int row, int col) const;

  PixelDraw draw(std::mt19937_64& rng) const;
  std::vector<PixelDraw> draw_batch(std::mt19937_64& rng,
                                    std::size_t batch_size) const;

 private:
  std::vector<Image> maps_;
  std::vector<double> cdf_;
  SamplerConfig cfg_;
  int width_ = 0;
  int height_ = 0;
  double total_ = 0.0;
};

// Omega_i = beta * T * M_i / max(sum_j M_j, 1), per pixel.
std::vector<Image> occlusion_scaling(const MaskStack& stack, double beta);

// Per pixel, max over j != i with |i - j| < n (clipped to the sequence) of the
// mean over channels of |I_i M_i - I_j M_j|.
Image temporal_difference(const MaskStack& stack, std::size_t frame, int n);

// W_i = max(temporal_difference_i, alpha) * Omega_i.
WeightMaps build_weight_maps(const MaskStack& stack, const SamplerConfig& cfg);
// W_i = M_i.
WeightMaps naive_weight_maps(const MaskStack& stack);
// W_i = Omega_i.
WeightMaps endonerf_weight_maps(const MaskStack& stack, double beta = 1.0);
// Dispatches on cfg.kind.
WeightMaps make_weight_maps(const MaskStack& stack, const SamplerConfig& cfg);

// Weight map as an 8-bit heatmap normalized to its frame maximum.
Image weight_heatmap(const Image& map);

}  // namespace forplane
