// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "forplane/adam.hpp"
#include "forplane/config.hpp"
#include "forplane/dataio.hpp"
#include "forplane/metrics.hpp"
#include "forplane/objective.hpp"

namespace forplane {

// Camera and timing needed to render without the training images.
struct SceneInfo {
  int width = 0, height = 0;
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  double near = 0.1, far = 1.0;
  double depth_scale = 1e-4;
  Aabb aabb;
  std::vector<double> taus;
  std::vector<Mat4> poses;

  static SceneInfo from(const Dataset& ds);
  Camera camera(std::size_t frame) const;
  std::size_t frames() const { return taus.size(); }
};

// Everything a checkpoint stores.
struct TrainState {
  Config config;  // field section already resolved for the dataset
  SceneInfo scene;
  FieldModel<float> model;
  AdamState adam;
  IndicatorGrid grid;
  int iteration = 0;
  std::mt19937_64 sampler_rng;
  std::mt19937_64 occupancy_rng;
};

// Fresh model, optimizer and grid for `ds` under `cfg`.
TrainState initial_state(const Dataset& ds, const Config& cfg);

// Derived occupancy constants: threshold = 0.01 * steps / (far - near) and
// init_density = threshold when unset; probes = cells / 32 when unset.
IndicatorGrid make_grid(const OccupancyConfig& cfg, const RenderSettings& render,
                        double near, double far);
std::size_t probe_count(const OccupancyConfig& cfg, const IndicatorGrid& grid);

struct TrainLogRow {
  int iteration = 0;
  double total = 0, rgb = 0, depth = 0, tv = 0, ts = 0, de = 0;
  double psnr = 0, psnr_masked = 0;
  double wall_ms = 0;
};

std::string log_header();
std::string log_line(const TrainLogRow& row);

class Trainer {
 public:
  // Validates dataset against the config before any iteration.
  Trainer(const Dataset& ds, const Config& cfg);
  Trainer(const Dataset& ds, TrainState state);

  // One optimization step; returns the batch loss terms.
  LossTerms<float> step();
  // Steps until config.train.iterations, calling on_log every log_every
  // iterations and at the end.
  void run(const std::function<void(const TrainLogRow&)>& on_log = {});

  TrainState& state() { return state_; }
  const TrainState& state() const { return state_; }
  const std::vector<std::size_t>& train_frames() const { return train_frames_; }
  const std::vector<std::size_t>& eval_frames() const { return eval_frames_; }
  // Moving history of total loss per iteration.
  const std::vector<double>& loss_history() const { return history_; }

  // Mean PSNR / masked PSNR over held-out frames (training frames when
  // nothing is held out), rendered with the indicator grid.
  std::pair<double, double> holdout_psnr() const;

 private:
  void setup();

  const Dataset& ds_;
  TrainState state_;
  std::vector<std::size_t> train_frames_, eval_frames_;
  WeightMaps weights_;
  RayBatch<float> batch_;
  ObjectiveWorkspace<float> workspace_;
  FieldGrads<float> grads_;
  std::vector<double> history_;
  double wall_ms_ = 0.0;
};

struct FrameRender {
  Image rgb;
  Image depth;
  Image opacity;
  std::uint64_t samples = 0;  // field evaluations
  double ms = 0.0;
};

// Renders a full frame; dense marching when grid is null.
FrameRender render_frame(const FieldQuery<float>& q, const Camera& cam,
                         double tau, const Aabb& aabb, const IndicatorGrid* grid,
                         const RenderSettings& settings, int threads);

RenderSettings eval_settings(const Config& cfg);

// Per-frame PSNR / masked PSNR / SSIM / depth RMSE of the state's renders
// against `ds` frames (references override the dataset images when given).
MetricReport evaluate_frames(const TrainState& state, const Dataset& ds,
                             std::span<const std::size_t> frames,
                             bool use_grid, int threads,
                             const std::vector<Image>* references = nullptr);

}  // namespace forplane
