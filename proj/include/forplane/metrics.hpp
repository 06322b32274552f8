// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "forplane/image.hpp"

namespace forplane {

inline constexpr double kPsnrCap = 99.0;

// 10 log10(1 / MSE) over all channels, capped at 99 dB. With a mask, only
// pixels whose mask value is nonzero count; an empty mask throws DataError.
double psnr(const Image& a, const Image& b, const Image* mask = nullptr);

// Mean local SSIM (11x11 Gaussian window, sigma 1.5, K1 0.01, K2 0.03,
// dynamic range 1) over valid windows, averaged over channels.
double ssim(const Image& a, const Image& b);

// RMSE over pixels where `valid` is nonzero (or gt > 0 when valid is null).
double depth_rmse(const Image& pred, const Image& gt, const Image* valid = nullptr);

struct FrameMetrics {
  std::size_t frame = 0;
  double psnr = 0.0;
  double psnr_masked = 0.0;
  double ssim = 0.0;
  double depth_rmse = 0.0;
};

struct MetricReport {
  double psnr = 0.0;
  double psnr_masked = 0.0;
  double ssim = 0.0;
  double depth_rmse = 0.0;
  std::vector<FrameMetrics> frames;
};

// Averages per-frame values.
MetricReport summarize(std::vector<FrameMetrics> frames);

}  // namespace forplane
