// SPDX-License-Identifier: Apache-2.0
#include "forplane/occupancy.hpp"

#include <algorithm>
#include <cmath>

namespace forplane {

IndicatorGrid::IndicatorGrid(std::array<int, 4> dims, double threshold,
                             double ema, double t_min, double init_density)
    : dims_(dims), threshold_(threshold), ema_(ema), t_min_(t_min) {
  for (int d : dims) {
    if (d < 1) throw UsageError("occupancy.dims entries must be >= 1");
  }
  if (!(ema > 0.0 && ema <= 1.0)) throw UsageError("occupancy.ema must be in (0,1]");
  if (!(threshold > 0.0)) throw UsageError("occupancy.threshold must be > 0");
  if (init_density < threshold) {
    throw UsageError("occupancy.init_density below threshold: grid would start empty");
  }
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2] * dims[3];
  cache_.assign(n, static_cast<float>(init_density));
  bits_.assign(n, false);
  rebinarize();
}

std::size_t IndicatorGrid::cell_of(const std::array<double, 4>& coords) const {
  std::size_t cell = 0;
  for (int a = 0; a < 4; ++a) {
    int i = static_cast<int>(std::floor(clamp01(coords[a]) * dims_[a]));
    i = std::min(i, dims_[a] - 1);
    cell = cell * dims_[a] + i;
  }
  return cell;
}

std::array<int, 4> IndicatorGrid::cell_coords(std::size_t cell) const {
  std::array<int, 4> idx;
  for (int a = 3; a >= 0; --a) {
    idx[a] = static_cast<int>(cell % dims_[a]);
    cell /= dims_[a];
  }
  return idx;
}

void IndicatorGrid::cell_box(std::size_t cell, std::array<double, 4>& lo,
                             std::array<double, 4>& hi) const {
  const auto idx = cell_coords(cell);
  for (int a = 0; a < 4; ++a) {
    lo[a] = static_cast<double>(idx[a]) / dims_[a];
    hi[a] = static_cast<double>(idx[a] + 1) / dims_[a];
  }
}

std::size_t IndicatorGrid::occupied_count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true));
}

void IndicatorGrid::set_density_cache(std::vector<float> cache) {
  if (cache.size() != cache_.size()) {
    throw DataError("occupancy cache has " + std::to_string(cache.size()) +
                    " cells, grid expects " + std::to_string(cache_.size()));
  }
  cache_ = std::move(cache);
  rebinarize();
}

void IndicatorGrid::fill(float density) {
  std::fill(cache_.begin(), cache_.end(), density);
  rebinarize();
}

void IndicatorGrid::rebinarize() {
  for (std::size_t c = 0; c < cache_.size(); ++c) {
    // Compared in float so a cache initialized to the threshold starts occupied.
    bits_[c] = cache_[c] >= static_cast<float>(threshold_);
  }
}

std::vector<SamplePoint> IndicatorGrid::filter_samples(
    std::span<const SamplePoint> candidates) const {
  std::vector<SamplePoint> out;
  for (const auto& s : candidates) {
    if (occupied(s.coords)) out.push_back(s);
  }
  return out;
}

RayMarcher::RayMarcher(const IndicatorGrid* grid, const Ray& ray,
                       const Aabb& aabb, int steps, double t_min)
    : grid_(grid), ray_(ray), aabb_(aabb), t_min_(t_min) {
  delta_ = (ray.t_far - ray.t_near) / steps;
  double t0, t1;
  if (steps < 1 || !aabb.intersect(ray.origin, ray.dir, t0, t1)) {
    k_ = k_end_ = 0;
    return;
  }
  // Candidate k sits at t_near + (k + 0.5) delta; keep those within [t0, t1].
  const double lo = std::ceil((t0 - ray.t_near) / delta_ - 0.5);
  const double hi = std::floor((t1 - ray.t_near) / delta_ - 0.5);
  k_ = static_cast<int>(std::clamp(lo, 0.0, static_cast<double>(steps)));
  k_end_ = static_cast<int>(std::clamp(hi + 1.0, 0.0, static_cast<double>(steps)));
}

std::optional<SamplePoint> RayMarcher::next(double transmittance) {
  if (transmittance < t_min_) {
    k_ = k_end_;
    return std::nullopt;
  }
  while (k_ < k_end_) {
    const int k = k_++;
    ++visited_;
    SamplePoint s;
    s.t = ray_.t_near + (k + 0.5) * delta_;
    s.delta = delta_;
    const Vec3 unit = aabb_.normalize(ray_.origin + s.t * ray_.dir);
    s.coords = {unit[0], unit[1], unit[2], ray_.time};
    if (grid_ && !grid_->occupied(s.coords)) continue;
    return s;
  }
  return std::nullopt;
}

}  // namespace forplane
