// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace forplane {

// Row-major, channel-interleaved float image.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, fill) {}

  bool empty() const { return data.empty(); }
  std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
  float& at(int row, int col, int ch = 0) {
    return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
  float at(int row, int col, int ch = 0) const {
    return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

// Raw PNG samples (8- or 16-bit), gray or RGB after expansion.
struct PngData {
  int width = 0;
  int height = 0;
  int channels = 1;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;
};

// Throws DataError naming the file on any failure.
PngData read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const PngData& png);

// 8-bit color / gray image with values in [0,1] (clamped, rounded).
void write_png8(const std::filesystem::path& path, const Image& img);
// Values are divided by `scale` and rounded into 16-bit gray.
void write_png16(const std::filesystem::path& path, const Image& img,
                 double scale);
// Reads an 8-bit image into [0,1] floats.
Image read_png8(const std::filesystem::path& path);

}  // namespace forplane
