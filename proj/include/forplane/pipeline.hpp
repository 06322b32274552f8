// SPDX-License-Identifier: Apache-2.0
//
// Higher-level operations shared by the command-line tool and the
// acceptance runner.
#pragma once

#include <string>
#include <vector>

#include "forplane/trainer.hpp"

namespace forplane {

struct Decomposition {
  FrameRender full;
  FrameRender static_only;   // dynamic planes forced to 1
  FrameRender dynamic_only;  // static planes forced to 1
  Image dynamic_normalized;  // dynamic_only.rgb rescaled to [0,1]
};

// Dense renders of one frame.
Decomposition decompose(const TrainState& state, std::size_t frame, int threads);

// Min-max rescale over all channels; a constant image is returned as is.
Image normalize_range(const Image& img);

struct MarchBenchRow {
  std::string strategy;  // "dense" or "grid"
  double samples_per_ray = 0.0;
  double ms_per_frame = 0.0;
  double psnr = 0.0;
};

// Renders `frames` with dense and grid-filtered marching and scores each
// against `references` (indexed by frame).
std::vector<MarchBenchRow> bench_march(const TrainState& state,
                                       const std::vector<std::size_t>& frames,
                                       const std::vector<Image>& references,
                                       int threads);

struct SweepAxis {
  std::string key;
  std::vector<double> values;
};

// "loss.lambda_tv=1e-4,1e-3;loss.lambda_ts=0.01,0.05". Throws UsageError on
// malformed specs or unknown keys.
std::vector<SweepAxis> parse_sweep_grid(const std::string& spec);

struct SweepRow {
  std::vector<double> values;  // one per axis
  double psnr = 0.0;
  double psnr_masked = 0.0;
  double final_loss = 0.0;
};

// Trains one run per grid point (row-major over axes) and scores held-out
// frames.
std::vector<SweepRow> run_sweep(const Dataset& ds, const Config& base,
                                const std::vector<SweepAxis>& axes);

std::string format_double(double v);

}  // namespace forplane
