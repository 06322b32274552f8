// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "forplane/common.hpp"

namespace forplane {

struct OneBlobConfig {
  int bins = 16;
  double sigma = 1.0 / 16.0;
};

struct FrequencyConfig {
  int num_octaves = 6;
};

// oneblob: one-blob of (x, y, z, tau). frequency: sin/cos octaves of the same
// four coordinates. dummy: constant 0.5 in place of the 4k one-blob entries.
// direction: one-blob of the view direction instead of the coordinates.
enum class EncodingKind { OneBlob, Frequency, Dummy, Direction };

EncodingKind parse_encoding_kind(const std::string& s);
std::string to_string(EncodingKind k);

struct EncodingConfig {
  EncodingKind kind = EncodingKind::OneBlob;
  OneBlobConfig oneblob;
  FrequencyConfig frequency;

  int width() const {
    switch (kind) {
      case EncodingKind::OneBlob:
      case EncodingKind::Dummy: return 4 * oneblob.bins;
      case EncodingKind::Frequency: return 4 * 2 * frequency.num_octaves;
      case EncodingKind::Direction: return 3 * oneblob.bins;
    }
    return 0;
  }
};

void validate(const OneBlobConfig& cfg);

inline constexpr double kOneBlobCutoff = 69.0;

// Entry i is exp(-(c_i - s)^2 / (2 sigma^2)) with bin centers
// c_i = (i + 0.5) / k. s is clamped to [0,1]; entries with
// exponent beyond kOneBlobCutoff are exactly zero.
template <typename T>
void oneblob_encode(double s, const OneBlobConfig& cfg, std::span<T> out) {
  s = clamp01(s);
  const double inv = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
  for (int i = 0; i < cfg.bins; ++i) {
    const double c = (i + 0.5) / cfg.bins;
    const double e = (c - s) * (c - s) * inv;
    // Tails below ~1e-30 are flushed to zero; they would otherwise become
    // float denormals and stall every downstream multiply.
    out[i] = e > kOneBlobCutoff ? T(0) : static_cast<T>(std::exp(-e));
  }
}

inline std::vector<double> oneblob_encode(double s, const OneBlobConfig& cfg) {
  validate(cfg);
  std::vector<double> out(cfg.bins);
  oneblob_encode<double>(s, cfg, out);
  return out;
}

// [sin(2^0 s), cos(2^0 s), ..., sin(2^(L-1) s), cos(2^(L-1) s)].
template <typename T>
void frequency_encode(double s, const FrequencyConfig& cfg, std::span<T> out) {
  double scale = 1.0;
  for (int l = 0; l < cfg.num_octaves; ++l) {
    out[2 * l] = static_cast<T>(std::sin(scale * s));
    out[2 * l + 1] = static_cast<T>(std::cos(scale * s));
    scale *= 2.0;
  }
}

inline std::vector<double> frequency_encode(double s,
                                            const FrequencyConfig& cfg) {
  if (cfg.num_octaves < 0) throw UsageError("num_octaves must be >= 0");
  std::vector<double> out(2 * cfg.num_octaves);
  frequency_encode<double>(s, cfg, out);
  return out;
}

// One-blob of x, y, z, tau concatenated in that order (4k entries).
inline std::vector<double> encode_point(const std::array<double, 4>& p,
                                        const OneBlobConfig& cfg) {
  validate(cfg);
  std::vector<double> out(4 * cfg.bins);
  for (int a = 0; a < 4; ++a) {
    oneblob_encode<double>(p[a], cfg,
                           std::span<double>(out).subspan(a * cfg.bins, cfg.bins));
  }
  return out;
}

// Fills the encoding part of the MLP input. `dir` is the unit ray direction,
// used only by EncodingKind::Direction.
template <typename T>
void encode_input(const EncodingConfig& cfg, const std::array<double, 4>& p,
                  const Vec3& dir, std::span<T> out) {
  const int k = cfg.oneblob.bins;
  switch (cfg.kind) {
    case EncodingKind::OneBlob:
      for (int a = 0; a < 4; ++a) {
        oneblob_encode<T>(p[a], cfg.oneblob, out.subspan(a * k, k));
      }
      break;
    case EncodingKind::Dummy:
      std::fill(out.begin(), out.begin() + 4 * k, T(0.5));
      break;
    case EncodingKind::Frequency: {
      const int n = 2 * cfg.frequency.num_octaves;
      for (int a = 0; a < 4; ++a) {
        frequency_encode<T>(p[a], cfg.frequency, out.subspan(a * n, n));
      }
      break;
    }
    case EncodingKind::Direction:
      for (int a = 0; a < 3; ++a) {
        oneblob_encode<T>(0.5 * (dir[a] + 1.0), cfg.oneblob,
                          out.subspan(a * k, k));
      }
      break;
  }
}

}  // namespace forplane
