// SPDX-License-Identifier: Apache-2.0
#include "forplane/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "forplane/common.hpp"

namespace forplane {

double psnr(const Image& a, const Image& b, const Image* mask) {
  if (!a.same_shape(b)) throw UsageError("psnr: image shapes differ");
  if (mask && (mask->width != a.width || mask->height != a.height)) {
    throw UsageError("psnr: mask shape differs");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < a.pixels(); ++p) {
    if (mask && mask->data[p * mask->channels] == 0.0f) continue;
    for (int c = 0; c < a.channels; ++c) {
      const double d = static_cast<double>(a.data[p * a.channels + c]) -
                       b.data[p * b.channels + c];
      sum += d * d;
    }
    count += a.channels;
  }
  if (count == 0) throw DataError("psnr: mask selects no pixels");
  const double mse = sum / static_cast<double>(count);
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

namespace {

std::vector<double> gaussian_window() {
  constexpr int n = 11;
  constexpr double sigma = 1.5;
  std::vector<double> g(n);
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = i - n / 2;
    g[i] = std::exp(-x * x / (2.0 * sigma * sigma));
    s += g[i];
  }
  for (double& v : g) v /= s;
  return g;
}

// Separable "valid" filtering of one channel.
std::vector<double> filter_valid(const std::vector<double>& img, int w, int h,
                                 const std::vector<double>& g) {
  const int n = static_cast<int>(g.size());
  const int ow = w - n + 1, oh = h - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += g[k] * img[r * w + c + k];
      tmp[r * ow + c] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += g[k] * tmp[(r + k) * ow + c];
      out[r * ow + c] = s;
    }
  }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw UsageError("ssim: image shapes differ");
  if (std::min(a.width, a.height) < 11) {
    throw UsageError("ssim: images must be at least 11x11");
  }
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const auto g = gaussian_window();
  const int w = a.width, h = a.height;
  const std::size_t n = a.pixels();
  double total = 0.0;
  for (int ch = 0; ch < a.channels; ++ch) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t p = 0; p < n; ++p) {
      x[p] = a.data[p * a.channels + ch];
      y[p] = b.data[p * b.channels + ch];
      xx[p] = x[p] * x[p];
      yy[p] = y[p] * y[p];
      xy[p] = x[p] * y[p];
    }
    const auto mx = filter_valid(x, w, h, g), my = filter_valid(y, w, h, g);
    const auto sxx = filter_valid(xx, w, h, g), syy = filter_valid(yy, w, h, g);
    const auto sxy = filter_valid(xy, w, h, g);
    double s = 0.0;
    for (std::size_t k = 0; k < mx.size(); ++k) {
      const double vx = sxx[k] - mx[k] * mx[k];
      const double vy = syy[k] - my[k] * my[k];
      const double cov = sxy[k] - mx[k] * my[k];
      s += ((2.0 * mx[k] * my[k] + c1) * (2.0 * cov + c2)) /
           ((mx[k] * mx[k] + my[k] * my[k] + c1) * (vx + vy + c2));
    }
    total += s / static_cast<double>(mx.size());
  }
  return total / a.channels;
}

double depth_rmse(const Image& pred, const Image& gt, const Image* valid) {
  if (pred.width != gt.width || pred.height != gt.height) {
    throw UsageError("depth_rmse: shapes differ");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < gt.pixels(); ++p) {
    const bool ok = valid ? valid->data[p] != 0.0f : gt.data[p] > 0.0f;
    if (!ok) continue;
    const double d = static_cast<double>(pred.data[p]) - gt.data[p];
    sum += d * d;
    ++count;
  }
  if (count == 0) throw DataError("depth_rmse: no valid pixels");
  return std::sqrt(sum / static_cast<double>(count));
}

MetricReport summarize(std::vector<FrameMetrics> frames) {
  MetricReport r;
  for (const auto& f : frames) {
    r.psnr += f.psnr;
    r.psnr_masked += f.psnr_masked;
    r.ssim += f.ssim;
    r.depth_rmse += f.depth_rmse;
  }
  if (!frames.empty()) {
    const double n = static_cast<double>(frames.size());
    r.psnr /= n;
    r.psnr_masked /= n;
    r.ssim /= n;
    r.depth_rmse /= n;
  }
  r.frames = std::move(frames);
  return r;
}

}  // namespace forplane
