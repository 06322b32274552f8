// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "forplane/dataio.hpp"

namespace forplane {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("forplane_test_" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

SynthConfig tiny(int frames) {
  SynthConfig cfg;
  cfg.width = cfg.height = 9;
  cfg.frames = frames;
  cfg.quadrature_steps = 1024;
  return cfg;
}

fs::path first_file(const fs::path& dir) {
  for (const auto& e : fs::directory_iterator(dir)) return e.path();
  return {};
}

TEST(Dataset, RoundTripWithinOneQuantum) {
  TempDir tmp;
  auto cfg = tiny(3);
  cfg.occluder = true;
  const auto scene = generate_synthetic(cfg);
  save_dataset(scene.dataset, tmp.path());
  const Dataset ds = load_dataset(tmp.path());
  ASSERT_EQ(ds.frames.size(), 3u);
  EXPECT_EQ(ds.width, 9);
  EXPECT_DOUBLE_EQ(ds.fx, scene.dataset.fx);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& a = scene.dataset.frames[i];
    const auto& b = ds.frames[i];
    for (std::size_t k = 0; k < a.image.data.size(); ++k) {
      EXPECT_NEAR(a.image.data[k], b.image.data[k], 0.5 / 255 + 1e-6);
    }
    for (std::size_t k = 0; k < a.depth.data.size(); ++k) {
      EXPECT_NEAR(a.depth.data[k], b.depth.data[k], 0.5 * ds.depth_scale + 1e-6);
    }
    EXPECT_EQ(a.mask.data, b.mask.data);
    EXPECT_TRUE(b.pose.isApprox(a.pose));
    EXPECT_DOUBLE_EQ(b.tau, 0.5 * i);
  }
}

TEST(Dataset, SingleFrameHasZeroTime) {
  TempDir tmp;
  save_dataset(generate_synthetic(tiny(1)).dataset, tmp.path());
  const Dataset ds = load_dataset(tmp.path());
  ASSERT_EQ(ds.frames.size(), 1u);
  EXPECT_EQ(ds.frames[0].tau, 0.0);
}

TEST(Dataset, NonBinaryMaskIsDataError) {
  TempDir tmp;
  save_dataset(generate_synthetic(tiny(2)).dataset, tmp.path());
  const fs::path mask = first_file(tmp.path() / "masks");
  PngData png = read_png(mask);
  png.samples[0] = 37;
  write_png(mask, png);
  EXPECT_THROW(load_dataset(tmp.path()), DataError);
}

TEST(Dataset, MissingMetaIsDataError) {
  TempDir tmp;
  EXPECT_THROW(load_dataset(tmp.path()), DataError);
}

TEST(Dataset, DepthScaleApplied) {
  TempDir tmp;
  auto ds = generate_synthetic(tiny(1)).dataset;
  ds.depth_scale = 0.001;
  std::fill(ds.frames[0].depth.data.begin(), ds.frames[0].depth.data.end(), 1.0f);
  save_dataset(ds, tmp.path());
  const PngData png = read_png(first_file(tmp.path() / "depth"));
  EXPECT_EQ(png.bit_depth, 16);
  EXPECT_EQ(png.samples[0], 1000);
  EXPECT_FLOAT_EQ(load_dataset(tmp.path()).frames[0].depth.data[0], 1.0f);
}

TEST(Dataset, ValidateRejectsBadMaskInMemory) {
  auto ds = generate_synthetic(tiny(1)).dataset;
  ds.frames[0].mask.data[3] = 0.5f;
  EXPECT_THROW(ds.validate(), DataError);
}

TEST(WriteOutputs, ThreeFilesPerFrame) {
  TempDir tmp;
  std::vector<Image> colors(3, Image(4, 4, 3, 0.5f)), depths(3, Image(4, 4, 1, 1.0f)),
      refs(3, Image(4, 4, 3, 0.25f));
  const auto paths = write_outputs(colors, depths, refs, 1e-3, tmp.path() / "out");
  EXPECT_EQ(paths.size(), 9u);
  for (const auto& p : paths) EXPECT_TRUE(fs::exists(p)) << p;
  const Image diff = read_png8(paths[2]);
  EXPECT_NEAR(diff.data[0], 0.25f, 0.5 / 255);
}

TEST(Synthetic, ZeroDensityIsBlack) {
  auto cfg = tiny(2);
  cfg.sigma0 = 0.0;
  const auto scene = generate_synthetic(cfg);
  for (const auto& f : scene.dataset.frames) {
    for (float v : f.image.data) EXPECT_EQ(v, 0.0f);
    for (float d : f.depth.data) EXPECT_EQ(d, 0.0f);
  }
}

TEST(Synthetic, OpaqueSphereDepthIsFrontSurface) {
  auto cfg = tiny(1);
  cfg.sigma0 = 1e5;
  cfg.quadrature_steps = 8192;
  const auto scene = generate_synthetic(cfg);
  // The center pixel looks down the optical axis through the sphere center at
  // distance camera_distance + 0.5, hitting the surface one radius earlier.
  const double want = cfg.camera_distance + 0.5 - cfg.radius;
  const double step = (cfg.far - cfg.near) / cfg.quadrature_steps;
  EXPECT_NEAR(scene.dataset.frames[0].depth.at(4, 4), want, step);
  EXPECT_NEAR(scene.opacity[0].at(4, 4), 1.0, 1e-6);
  EXPECT_EQ(scene.dataset.frames[0].depth.at(0, 0), 0.0f);
}

TEST(Synthetic, StaticSceneHasNoTemporalDifference) {
  auto cfg = tiny(4);
  cfg.amplitude = 0.0;
  const auto stack = generate_synthetic(cfg).dataset.mask_stack();
  for (std::size_t i = 0; i < 4; ++i) {
    for (float v : temporal_difference(stack, i, 3).data) EXPECT_EQ(v, 0.0f);
  }
}

TEST(Synthetic, OccluderMasksAndPaintsPixels) {
  auto cfg = tiny(2);
  cfg.occluder = true;
  const auto scene = generate_synthetic(cfg);
  const auto& f = scene.dataset.frames[0];
  int hidden = 0;
  for (int r = 0; r < 9; ++r) {
    for (int c = 0; c < 9; ++c) {
      if (f.mask.at(r, c) == 0.0f) {
        ++hidden;
        EXPECT_EQ(f.image.at(r, c, 1), cfg.occluder_gray);
        EXPECT_EQ(f.depth.at(r, c), 0.0f);
      }
    }
  }
  EXPECT_EQ(hidden, 9);
}

TEST(DistortDepth, AffineOnValidOnly) {
  auto ds = generate_synthetic(tiny(1)).dataset;
  const auto before = ds.frames[0].depth;
  distort_depth(ds, 2.0, 0.5);
  for (std::size_t k = 0; k < before.data.size(); ++k) {
    if (before.data[k] > 0.0f) {
      EXPECT_FLOAT_EQ(ds.frames[0].depth.data[k], 2.0f * before.data[k] + 0.5f);
    } else {
      EXPECT_EQ(ds.frames[0].depth.data[k], 0.0f);
    }
  }
}

}  // namespace
}  // namespace forplane
