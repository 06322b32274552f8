// SPDX-License-Identifier: Apache-2.0
//
// Multi-resolution orthogonal feature planes. Each level holds three static
// space planes (XY, YZ, XZ) and three dynamic space-time planes (XT, YT, ZT).
// A point's feature is the element-wise product of the bilinear lookups into
// every plane of every level (or, in ConcatLevels mode, one product per level
// concatenated).
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "forplane/common.hpp"

namespace forplane {

enum class AxisPair : std::uint8_t { XY, YZ, XZ, XT, YT, ZT };

inline constexpr std::array<AxisPair, 6> kPlaneOrder = {
    AxisPair::XY, AxisPair::YZ, AxisPair::XZ,
    AxisPair::XT, AxisPair::YT, AxisPair::ZT};

inline constexpr int kPlanesPerLevel = 6;

// Which of (x, y, z, tau) index the plane's first and second axes.
constexpr std::array<int, 2> axis_coords(AxisPair p) {
  switch (p) {
    case AxisPair::XY: return {0, 1};
    case AxisPair::YZ: return {1, 2};
    case AxisPair::XZ: return {0, 2};
    case AxisPair::XT: return {0, 3};
    case AxisPair::YT: return {1, 3};
    case AxisPair::ZT: return {2, 3};
  }
  return {0, 0};
}

constexpr bool is_space_time(AxisPair p) {
  return p == AxisPair::XT || p == AxisPair::YT || p == AxisPair::ZT;
}

constexpr std::string_view axis_name(AxisPair p) {
  constexpr std::array<std::string_view, 6> names = {"XY", "YZ", "XZ",
                                                     "XT", "YT", "ZT"};
  return names[static_cast<int>(p)];
}

enum class FusionMode { Product, ConcatLevels };
enum class FieldPart { Static, Dynamic };

template <typename T>
struct PlaneGrid {
  AxisPair axes = AxisPair::XY;
  int res_a = 2;
  int res_b = 2;
  int dim = 1;
  std::vector<T> values;

  PlaneGrid() = default;
  PlaneGrid(AxisPair a, int ra, int rb, int d, T fill = T(1))
      : axes(a), res_a(ra), res_b(rb), dim(d),
        values(static_cast<std::size_t>(ra) * rb * d, fill) {
    if (ra < 2 || rb < 2 || d < 1) {
      throw UsageError("plane grids need at least 2x2 nodes and D >= 1");
    }
  }

  std::size_t node_offset(int i, int j) const {
    return (static_cast<std::size_t>(i) * res_b + j) * dim;
  }
  T& at(int i, int j, int d) { return values[node_offset(i, j) + d]; }
  const T& at(int i, int j, int d) const { return values[node_offset(i, j) + d]; }
  std::size_t size() const { return values.size(); }
};

// Four touched lattice nodes and their bilinear weights.
template <typename T>
struct BilinearStencil {
  std::array<std::uint32_t, 4> offsets{};
  std::array<T, 4> weights{};
};

namespace detail {

// Cell index and fractional position along one axis. Coordinates that land
// within rounding distance of a node snap onto it so node queries are exact.
inline void locate(double u, int res, int& cell, double& frac) {
  u = clamp01(u);
  double f = u * (res - 1);
  double r = std::floor(f + 0.5);  // f >= 0
  if (std::abs(f - r) < 1e-9 * (res - 1)) f = r;
  cell = std::min(static_cast<int>(f), res - 2);
  frac = f - cell;
}

}  // namespace detail

template <typename T>
BilinearStencil<T> bilinear_stencil(const PlaneGrid<T>& plane, double u,
                                    double w) {
  int i, j;
  double fu, fw;
  detail::locate(u, plane.res_a, i, fu);
  detail::locate(w, plane.res_b, j, fw);
  BilinearStencil<T> s;
  s.offsets = {static_cast<std::uint32_t>(plane.node_offset(i, j)),
               static_cast<std::uint32_t>(plane.node_offset(i, j + 1)),
               static_cast<std::uint32_t>(plane.node_offset(i + 1, j)),
               static_cast<std::uint32_t>(plane.node_offset(i + 1, j + 1))};
  s.weights = {static_cast<T>((1.0 - fu) * (1.0 - fw)),
               static_cast<T>((1.0 - fu) * fw),
               static_cast<T>(fu * (1.0 - fw)), static_cast<T>(fu * fw)};
  return s;
}

template <typename T>
void apply_stencil(const PlaneGrid<T>& plane, const BilinearStencil<T>& s,
                   std::span<T> out) {
  const T* v = plane.values.data();
  const T* n0 = v + s.offsets[0];
  const T* n1 = v + s.offsets[1];
  const T* n2 = v + s.offsets[2];
  const T* n3 = v + s.offsets[3];
  const T w0 = s.weights[0], w1 = s.weights[1], w2 = s.weights[2],
          w3 = s.weights[3];
  for (int d = 0; d < plane.dim; ++d) {
    out[d] = w0 * n0[d] + w1 * n1[d] + w2 * n2[d] + w3 * n3[d];
  }
}

// Bilinear lookup with nodes at i/(res-1). (u, w) are clamped to [0,1].
template <typename T>
std::vector<T> bilinear_query(const PlaneGrid<T>& plane, double u, double w) {
  std::vector<T> out(plane.dim);
  apply_stencil(plane, bilinear_stencil(plane, u, w), std::span<T>(out));
  return out;
}

struct PlaneSetConfig {
  std::vector<int> spatial_res = {8, 16, 32, 64};
  int temporal_res = 2;
  int feature_dim = 16;
  FusionMode fusion = FusionMode::Product;
};

template <typename T>
class PlaneSet {
 public:
  PlaneSet() = default;

  // All planes start at exactly 1; call init_static_uniform for the usual
  // near-identity static start.
  explicit PlaneSet(const PlaneSetConfig& cfg) : config_(cfg) {
    if (cfg.spatial_res.empty()) throw UsageError("plane set needs >= 1 level");
    if (cfg.temporal_res < 2) {
      throw UsageError("temporal resolution must be >= 2");
    }
    for (int n : cfg.spatial_res) {
      for (AxisPair p : kPlaneOrder) {
        int rb = is_space_time(p) ? cfg.temporal_res : n;
        planes_.emplace_back(p, n, rb, cfg.feature_dim, T(1));
      }
    }
  }

  const PlaneSetConfig& config() const { return config_; }
  int levels() const { return static_cast<int>(config_.spatial_res.size()); }
  int feature_dim() const { return config_.feature_dim; }
  FusionMode fusion() const { return config_.fusion; }
  int feature_width() const {
    return config_.fusion == FusionMode::Product ? feature_dim()
                                                 : feature_dim() * levels();
  }

  static std::size_t index(int level, AxisPair p) {
    return static_cast<std::size_t>(level) * kPlanesPerLevel +
           static_cast<std::size_t>(p);
  }
  PlaneGrid<T>& plane(int level, AxisPair p) { return planes_[index(level, p)]; }
  const PlaneGrid<T>& plane(int level, AxisPair p) const {
    return planes_[index(level, p)];
  }

  // Level-major, then XY, YZ, XZ, XT, YT, ZT.
  std::vector<PlaneGrid<T>>& planes() { return planes_; }
  const std::vector<PlaneGrid<T>>& planes() const { return planes_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : planes_) n += p.size();
    return n;
  }

  void fill(FieldPart part, T value) {
    for (auto& p : planes_) {
      if (is_space_time(p.axes) == (part == FieldPart::Dynamic)) {
        std::fill(p.values.begin(), p.values.end(), value);
      }
    }
  }

  template <typename Rng>
  void init_uniform(FieldPart part, Rng& rng, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& p : planes_) {
      if (is_space_time(p.axes) != (part == FieldPart::Dynamic)) continue;
      for (auto& v : p.values) v = static_cast<T>(dist(rng));
    }
  }

 private:
  PlaneSetConfig config_;
  std::vector<PlaneGrid<T>> planes_;
};

// Gradient accumulator shaped like a PlaneSet's values. Workers own private
// buffers and reduce them with add().
template <typename T>
struct PlaneGrads {
  std::vector<std::vector<T>> planes;

  PlaneGrads() = default;
  explicit PlaneGrads(const PlaneSet<T>& set) {
    for (const auto& p : set.planes()) planes.emplace_back(p.size(), T(0));
  }
  void zero() {
    for (auto& g : planes) std::fill(g.begin(), g.end(), T(0));
  }
  void add(const PlaneGrads& other) {
    for (std::size_t i = 0; i < planes.size(); ++i) {
      auto& a = planes[i];
      const auto& b = other.planes[i];
      for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
    }
  }
};

// Read-only query view. Planes of a forced part behave as constant 1 without
// touching stored parameters.
template <typename T>
struct PlaneView {
  const PlaneSet<T>* set = nullptr;
  bool static_identity = false;
  bool dynamic_identity = false;

  bool identity(AxisPair p) const {
    return is_space_time(p) ? dynamic_identity : static_identity;
  }
};

template <typename T>
PlaneView<T> full_view(const PlaneSet<T>& set) {
  return PlaneView<T>{&set, false, false};
}

template <typename T>
PlaneView<T> force_field_to_identity(const PlaneSet<T>& set, FieldPart which) {
  PlaneView<T> v{&set, false, false};
  (which == FieldPart::Static ? v.static_identity : v.dynamic_identity) = true;
  return v;
}

// Per-point forward record used by fuse_backward.
template <typename T>
struct FusionCache {
  std::vector<BilinearStencil<T>> stencils;
  std::vector<T> queries;   // planes x D
  std::vector<T> scratch;   // suffix products for the backward pass
};

// Fused feature of `coords` = (x, y, z, tau) in [0,1]^4. `out` has
// feature_width() entries.
template <typename T>
void fuse_features(const PlaneView<T>& view,
                   const std::array<double, 4>& coords, std::span<T> out,
                   FusionCache<T>* cache = nullptr) {
  const PlaneSet<T>& set = *view.set;
  const int dim = set.feature_dim();
  const auto& planes = set.planes();
  std::fill(out.begin(), out.end(), T(1));

  thread_local std::vector<T> local;
  std::vector<T>* queries = &local;
  if (cache) {
    cache->stencils.resize(planes.size());
    queries = &cache->queries;
  }
  queries->resize(planes.size() * dim);

  for (std::size_t k = 0; k < planes.size(); ++k) {
    const PlaneGrid<T>& plane = planes[k];
    std::span<T> q(queries->data() + k * dim, dim);
    if (view.identity(plane.axes)) {
      std::fill(q.begin(), q.end(), T(1));
      continue;
    }
    const auto [ca, cb] = axis_coords(plane.axes);
    BilinearStencil<T> s = bilinear_stencil(plane, coords[ca], coords[cb]);
    if (cache) cache->stencils[k] = s;
    apply_stencil(plane, s, q);
    const int level = static_cast<int>(k / kPlanesPerLevel);
    T* dst = out.data() +
             (set.fusion() == FusionMode::Product ? 0 : level * dim);
    for (int d = 0; d < dim; ++d) dst[d] *= q[d];
  }
}

// Reverse of fuse_features: each non-identity plane receives
// upstream * (product of the other planes in its fusion group), scattered on
// its four stencil nodes by the bilinear weights.
template <typename T>
void fuse_backward(const PlaneView<T>& view, FusionCache<T>& cache,
                   std::span<const T> upstream, PlaneGrads<T>& grads) {
  const PlaneSet<T>& set = *view.set;
  const int dim = set.feature_dim();
  const auto& planes = set.planes();
  const bool product = set.fusion() == FusionMode::Product;
  const std::size_t group = product ? planes.size() : kPlanesPerLevel;
  const std::size_t groups = planes.size() / group;

  cache.scratch.resize((group + 1) * dim + 2 * dim);
  T* suffix = cache.scratch.data();             // (group + 1) x dim
  T* prefix = suffix + (group + 1) * dim;       // dim
  T* g = prefix + dim;                          // dim

  for (std::size_t grp = 0; grp < groups; ++grp) {
    const std::size_t first = grp * group;
    const T* up = upstream.data() + (product ? 0 : grp * dim);
    bool any = false;
    for (int d = 0; d < dim; ++d) any = any || up[d] != T(0);
    if (!any) continue;

    for (int d = 0; d < dim; ++d) suffix[group * dim + d] = T(1);
    for (std::size_t k = group; k-- > 0;) {
      const T* q = cache.queries.data() + (first + k) * dim;
      for (int d = 0; d < dim; ++d) {
        suffix[k * dim + d] = suffix[(k + 1) * dim + d] * q[d];
      }
    }
    for (int d = 0; d < dim; ++d) prefix[d] = T(1);

    for (std::size_t k = 0; k < group; ++k) {
      const std::size_t idx = first + k;
      const T* q = cache.queries.data() + idx * dim;
      if (!view.identity(planes[idx].axes)) {
        for (int d = 0; d < dim; ++d) {
          g[d] = up[d] * prefix[d] * suffix[(k + 1) * dim + d];
        }
        const BilinearStencil<T>& s = cache.stencils[idx];
        T* dst = grads.planes[idx].data();
        for (int c = 0; c < 4; ++c) {
          const T w = s.weights[c];
          if (w == T(0)) continue;
          T* node = dst + s.offsets[c];
          for (int d = 0; d < dim; ++d) node[d] += w * g[d];
        }
      }
      for (int d = 0; d < dim; ++d) prefix[d] *= q[d];
    }
  }
}

}  // namespace forplane
