// SPDX-License-Identifier: Apache-2.0
//
// Indicator grid: a cached binary occupancy map over (x, y, z, tau) bins.
// A cell is occupied iff its running density estimate is at least the
// threshold. A fresh grid is fully occupied; update() probes the field and
// decays estimates so empty space clears over training.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "forplane/camera.hpp"
#include "forplane/common.hpp"

namespace forplane {

struct OccupancyConfig {
  std::array<int, 4> dims = {64, 64, 64, 8};
  // Non-positive means "derive": threshold = 0.01 * steps / (far - near),
  // init_density = threshold, probes = cells / 32.
  double threshold = 0.0;
  double init_density = 0.0;
  int probes = 0;
  double ema = 0.95;
  int update_every = 16;
  int warmup = 256;
  double t_min = 1e-4;
};

class IndicatorGrid {
 public:
  IndicatorGrid() = default;
  IndicatorGrid(std::array<int, 4> dims, double threshold, double ema,
                double t_min, double init_density);

  const std::array<int, 4>& dims() const { return dims_; }
  std::size_t cell_count() const { return cache_.size(); }
  double threshold() const { return threshold_; }
  double ema() const { return ema_; }
  double t_min() const { return t_min_; }

  std::size_t cell_of(const std::array<double, 4>& coords) const;
  std::array<int, 4> cell_coords(std::size_t cell) const;
  // Normalized box [lo, hi) of a cell along each of the four axes.
  void cell_box(std::size_t cell, std::array<double, 4>& lo,
                std::array<double, 4>& hi) const;

  bool occupied(std::size_t cell) const { return bits_[cell]; }
  bool occupied(const std::array<double, 4>& coords) const {
    return bits_[cell_of(coords)];
  }
  std::size_t occupied_count() const;

  std::span<const float> density_cache() const { return cache_; }
  // Replaces the density estimates and rebinarizes.
  void set_density_cache(std::vector<float> cache);
  void fill(float density);

  // Keeps exactly the candidates whose cell bit is set, preserving order.
  std::vector<SamplePoint> filter_samples(
      std::span<const SamplePoint> candidates) const;

  // Probes `probes` cells (half uniform over the grid, half uniform over the
  // currently occupied cells) at a jittered point inside each, then
  // cache <- max(ema * cache, sigma) and rebinarizes.
  template <typename DensityFn, typename Rng>
  void update(DensityFn&& density, Rng& rng, std::size_t probes);

 private:
  void rebinarize();

  std::array<int, 4> dims_{1, 1, 1, 1};
  double threshold_ = 0.0;
  double ema_ = 1.0;
  double t_min_ = 0.0;
  std::vector<float> cache_;
  std::vector<bool> bits_;
};

// Uniform steps of delta = (t_far - t_near) / steps, sample k at
// t_near + (k + 0.5) delta, restricted to the scene box. Candidates in empty
// cells are skipped (when a grid is given) and the walk ends once the
// accumulated transmittance fed back by the caller drops below t_min.
class RayMarcher {
 public:
  RayMarcher(const IndicatorGrid* grid, const Ray& ray, const Aabb& aabb,
             int steps, double t_min);

  std::optional<SamplePoint> next(double transmittance);

  double step() const { return delta_; }
  int visited() const { return visited_; }

 private:
  const IndicatorGrid* grid_;
  Ray ray_;
  Aabb aabb_;
  double delta_ = 0.0;
  double t_min_ = 0.0;
  int k_ = 0;
  int k_end_ = 0;
  int visited_ = 0;
};

template <typename DensityFn, typename Rng>
void IndicatorGrid::update(DensityFn&& density, Rng& rng, std::size_t probes) {
  std::vector<std::uint32_t> occupied_cells;
  occupied_cells.reserve(occupied_count());
  for (std::size_t c = 0; c < cache_.size(); ++c) {
    if (bits_[c]) occupied_cells.push_back(static_cast<std::uint32_t>(c));
  }
  std::uniform_int_distribution<std::size_t> any_cell(0, cache_.size() - 1);
  std::uniform_real_distribution<double> jitter(0.0, 1.0);
  const std::size_t half = probes / 2;
  for (std::size_t p = 0; p < probes; ++p) {
    std::size_t cell;
    if (p >= half && !occupied_cells.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, occupied_cells.size() - 1);
      cell = occupied_cells[pick(rng)];
    } else {
      cell = any_cell(rng);
    }
    const auto idx = cell_coords(cell);
    std::array<double, 4> coords;
    for (int a = 0; a < 4; ++a) coords[a] = (idx[a] + jitter(rng)) / dims_[a];
    const double sigma = density(coords);
    cache_[cell] = static_cast<float>(
        std::max(ema_ * static_cast<double>(cache_[cell]), sigma));
  }
  rebinarize();
}

}  // namespace forplane
