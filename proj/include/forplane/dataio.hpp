// SPDX-License-Identifier: Apache-2.0
//
// On-disk dataset format and the synthetic moving-sphere scene.
//
//   <dir>/meta.json  {width, height, fx, fy, cx, cy, near, far, depth_scale,
//                     aabb_min[3], aabb_max[3],
//                     frames: [{image, depth?, mask, time, pose[16]}]}
//   <dir>/images/*.png  8-bit RGB
//   <dir>/masks/*.png   8-bit gray, 0 (tool) or 255 (tissue)
//   <dir>/depth/*.png   16-bit gray, world depth = value * depth_scale
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "forplane/camera.hpp"
#include "forplane/common.hpp"
#include "forplane/image.hpp"
#include "forplane/sampler.hpp"

namespace forplane {

struct Frame {
  Image image;  // H x W x 3 in [0,1]
  Image depth;  // H x W, world units, 0 = invalid; empty when absent
  Image mask;   // H x W, 1 = tissue, 0 = tool
  double time = 0.0;  // timestamp as stored
  double tau = 0.0;   // time normalized to [0,1] over the sequence
  Mat4 pose = Mat4::Identity();
};

struct Dataset {
  int width = 0, height = 0;
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  double near = 0.1, far = 1.0;
  double depth_scale = 1e-4;
  Aabb aabb;
  std::vector<Frame> frames;

  Camera camera(std::size_t frame) const;
  bool has_depth() const;
  MaskStack mask_stack() const;
  // Throws DataError on inconsistent shapes, non-binary masks or bad poses.
  void validate() const;
};

// Sets tau from the stored timestamps (min -> 0, max -> 1; one frame -> 0).
void assign_normalized_time(Dataset& ds);

Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

// Moving sphere: center c(tau) = center + amplitude sin(2 pi tau) motion,
// constant density sigma0 inside, color 0.15 + 0.7 * (unit-box position).
struct SphereOracle {
  Aabb aabb;
  Vec3 center{0.5, 0.5, 0.5};
  double radius = 0.25;
  double amplitude = 0.15;
  Vec3 motion{1.0, 0.0, 0.0};
  double sigma0 = 40.0;

  Vec3 center_at(double tau) const;
  double density(const Vec3& world, double tau) const;
  Rgb<double> color(const Vec3& world) const;
  // Query in normalized (x, y, z, tau) coordinates.
  double density_normalized(const std::array<double, 4>& coords) const;
  Rgb<double> color_normalized(const std::array<double, 4>& coords) const;
};

struct SynthConfig {
  int width = 64, height = 64, frames = 30;
  double radius = 0.25;
  double amplitude = 0.15;
  double sigma0 = 40.0;
  int quadrature_steps = 4096;
  double focal = 70.0;
  double camera_distance = 1.0;  // from the box face z = 0
  double near = 0.9, far = 2.1;
  double depth_scale = 1e-4;
  bool occluder = false;
  double occluder_size = 0.3;    // rectangle side as a fraction of the image
  float occluder_gray = 0.5f;
  // Depth below this rendered opacity is marked invalid.
  double depth_min_opacity = 1e-3;
};

struct SyntheticScene {
  Dataset dataset;              // masked images, unquantized floats
  SphereOracle oracle;
  std::vector<Image> clean;     // images without the occluder
  std::vector<Image> opacity;
};

SyntheticScene generate_synthetic(const SynthConfig& cfg);

// Renders one oracle pixel by dense uniform quadrature with the renderer's
// compositing; samples outside the sphere have zero density and are skipped.
struct OraclePixel {
  Rgb<double> rgb{};
  double depth = 0.0;
  double opacity = 0.0;
};
OraclePixel render_oracle_pixel(const SphereOracle& oracle, const Camera& cam,
                                int row, int col, double tau, int steps);

// Replaces valid depth d by a * d + b (a monocular-style depth with unknown
// scale and shift).
void distort_depth(Dataset& ds, double a, double b);

// Writes color_XXX.png, depth_XXX.png (16-bit, depth_scale) and diff_XXX.png
// (|render - reference|) per frame. Returns the written paths.
std::vector<std::filesystem::path> write_outputs(
    const std::vector<Image>& colors, const std::vector<Image>& depths,
    const std::vector<Image>& references, double depth_scale,
    const std::filesystem::path& dir);

std::string frame_name(const std::string& prefix, std::size_t index);

}  // namespace forplane
