// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace forplane {

using Vec3 = Eigen::Vector3d;
using Mat4 = Eigen::Matrix4d;

template <typename T>
using Rgb = std::array<T, 3>;

// Dataset or input-file problems. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values in parameters, gradients or field outputs. Exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration keys or malformed command-line arguments. Exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Axis-aligned scene bounds; normalized coordinates live in [0,1]^3.
struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Ones();

  Vec3 extent() const { return max - min; }
  double diagonal() const { return extent().norm(); }

  Vec3 normalize(const Vec3& world) const {
    return (world - min).cwiseQuotient(extent());
  }
  Vec3 denormalize(const Vec3& unit) const {
    return min + unit.cwiseProduct(extent());
  }
  bool contains(const Vec3& world) const {
    return (world.array() >= min.array()).all() &&
           (world.array() <= max.array()).all();
  }

  // Slab test. Returns false when the ray misses; otherwise [t0, t1] is the
  // parametric overlap (t0 may be negative if the origin is inside).
  bool intersect(const Vec3& origin, const Vec3& dir, double& t0,
                 double& t1) const {
    t0 = -std::numeric_limits<double>::infinity();
    t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (std::abs(dir[a]) < 1e-300) {
        if (origin[a] < min[a] || origin[a] > max[a]) return false;
        continue;
      }
      double inv = 1.0 / dir[a];
      double ta = (min[a] - origin[a]) * inv;
      double tb = (max[a] - origin[a]) * inv;
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
    }
    return t1 >= t0;
  }
};

// Time index i of `frames` frames mapped to [0,1].
inline double normalized_time(std::size_t index, std::size_t frames) {
  return frames <= 1 ? 0.0
                     : static_cast<double>(index) /
                           static_cast<double>(frames - 1);
}

// One quadrature point along a ray. `coords` are normalized (x, y, z, tau);
// `t` and `delta` are world-space distance along the ray and segment length.
struct SamplePoint {
  std::array<double, 4> coords{};
  double t = 0.0;
  double delta = 0.0;
};

template <typename T>
inline T clamp01(T v) {
  return v < T(0) ? T(0) : (v > T(1) ? T(1) : v);
}

template <typename T>
inline T softplus(T x) {
  // log(1 + e^x) without overflow for large x.
  return x > T(20) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename T>
inline T logistic(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace forplane
