// SPDX-License-Identifier: Apache-2.0
#include "forplane/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include "forplane/common.hpp"

namespace forplane {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

PngData read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw DataError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                           nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng init failed for " + path.string());
  }
  PngData out;
  std::vector<png_bytep> rows;
  std::vector<std::uint8_t> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("corrupt PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * out.height);
  rows.resize(out.height);
  for (int r = 0; r < out.height; ++r) rows[r] = buffer.data() + r * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t n = static_cast<std::size_t>(out.width) * out.height * out.channels;
  out.samples.resize(n);
  if (out.bit_depth == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      out.samples[i] = static_cast<std::uint16_t>(buffer[2 * i] | (buffer[2 * i + 1] << 8));
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = buffer[i];
  }
  return out;
}

namespace {

// Returns false on a libpng error. Kept free of locals that outlive setjmp.
bool encode_png(std::FILE* file, const PngData& img, png_bytep* rows) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, file);
  png_set_IHDR(png, info, img.width, img.height, img.bit_depth,
               img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (img.bit_depth == 16) png_set_swap(png);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

void write_png(const std::filesystem::path& path, const PngData& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw DataError("only gray or RGB PNGs are written: " + path.string());
  }
  if (img.bit_depth != 8 && img.bit_depth != 16) {
    throw DataError("only 8- or 16-bit PNGs are written: " + path.string());
  }
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw DataError("cannot write " + path.string());
  const int bytes = img.bit_depth == 16 ? 2 : 1;
  const std::size_t rowbytes = static_cast<std::size_t>(img.width) * img.channels * bytes;
  std::vector<std::uint8_t> buffer(rowbytes * img.height);
  for (std::size_t i = 0; i < img.samples.size(); ++i) {
    if (bytes == 2) {
      buffer[2 * i] = static_cast<std::uint8_t>(img.samples[i] & 0xff);
      buffer[2 * i + 1] = static_cast<std::uint8_t>(img.samples[i] >> 8);
    } else {
      buffer[i] = static_cast<std::uint8_t>(img.samples[i]);
    }
  }
  std::vector<png_bytep> rows(img.height);
  for (int r = 0; r < img.height; ++r) rows[r] = buffer.data() + r * rowbytes;
  if (!encode_png(file.get(), img, rows.data())) {
    throw DataError("failed writing PNG " + path.string());
  }
}

void write_png8(const std::filesystem::path& path, const Image& img) {
  PngData png{img.width, img.height, img.channels, 8, {}};
  png.samples.resize(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    png.samples[i] = static_cast<std::uint16_t>(
        std::lround(std::clamp(img.data[i], 0.0f, 1.0f) * 255.0f));
  }
  write_png(path, png);
}

void write_png16(const std::filesystem::path& path, const Image& img,
                 double scale) {
  if (img.channels != 1) throw DataError("16-bit output expects one channel");
  PngData png{img.width, img.height, 1, 16, {}};
  png.samples.resize(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const double v = std::round(static_cast<double>(img.data[i]) / scale);
    png.samples[i] = static_cast<std::uint16_t>(std::clamp(v, 0.0, 65535.0));
  }
  write_png(path, png);
}

Image read_png8(const std::filesystem::path& path) {
  const PngData png = read_png(path);
  if (png.bit_depth != 8) throw DataError("expected 8-bit PNG: " + path.string());
  Image img(png.width, png.height, png.channels);
  for (std::size_t i = 0; i < png.samples.size(); ++i) {
    img.data[i] = png.samples[i] / 255.0f;
  }
  return img;
}

}  // namespace forplane
