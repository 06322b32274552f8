// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "forplane/plane_field.hpp"

namespace forplane {
namespace {

// Straight-line bilinear evaluation on a scalar lattice with nodes at
// i / (res - 1), independent of the stencil code.
double reference_bilinear(const std::vector<std::vector<double>>& f, double u,
                          double w) {
  const int ra = static_cast<int>(f.size());
  const int rb = static_cast<int>(f[0].size());
  const double x = u * (ra - 1), y = w * (rb - 1);
  const int i = std::min(static_cast<int>(std::floor(x)), ra - 2);
  const int j = std::min(static_cast<int>(std::floor(y)), rb - 2);
  const double a = x - i, b = y - j;
  return f[i][j] * (1 - a) * (1 - b) + f[i][j + 1] * (1 - a) * b +
         f[i + 1][j] * a * (1 - b) + f[i + 1][j + 1] * a * b;
}

PlaneGrid<double> scalar_plane(const std::vector<std::vector<double>>& f) {
  PlaneGrid<double> p(AxisPair::XY, static_cast<int>(f.size()),
                      static_cast<int>(f[0].size()), 1, 0.0);
  for (int i = 0; i < p.res_a; ++i) {
    for (int j = 0; j < p.res_b; ++j) p.at(i, j, 0) = f[i][j];
  }
  return p;
}

TEST(BilinearQuery, CenterOfTwoByTwoIsMean) {
  const auto p = scalar_plane({{0, 1}, {2, 3}});
  EXPECT_DOUBLE_EQ(bilinear_query(p, 0.5, 0.5)[0], 1.5);
}

TEST(BilinearQuery, NodeQueriesAreExact) {
  const auto p = scalar_plane({{0, 1}, {2, 3}});
  EXPECT_DOUBLE_EQ(bilinear_query(p, 0.0, 0.0)[0], 0.0);
  EXPECT_DOUBLE_EQ(bilinear_query(p, 1.0, 0.0)[0], 2.0);
  EXPECT_DOUBLE_EQ(bilinear_query(p, 1.0, 1.0)[0], 3.0);
}

TEST(BilinearQuery, ThreeByThreeSumOfIndices) {
  std::vector<std::vector<double>> f(3, std::vector<double>(3));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) f[i][j] = i + j;
  }
  const auto p = scalar_plane(f);
  // f is linear in (u, w): 2u + 2w, which bilinear interpolation reproduces.
  const double expected = 2.0;
  EXPECT_NEAR(reference_bilinear(f, 0.25, 0.75), expected, 1e-15);
  EXPECT_NEAR(bilinear_query(p, 0.25, 0.75)[0], expected, 1e-15);
}

TEST(BilinearQuery, OutOfRangeClamps) {
  const auto p = scalar_plane({{0, 1}, {2, 3}});
  EXPECT_DOUBLE_EQ(bilinear_query(p, -0.5, 2.0)[0], 1.0);
  EXPECT_DOUBLE_EQ(bilinear_query(p, 7.0, -1.0)[0], 2.0);
}

TEST(BilinearQuery, MatchesReferenceOnRandomLattice) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> f(5, std::vector<double>(7));
  for (auto& row : f) {
    for (auto& v : row) v = u(rng);
  }
  PlaneGrid<double> p(AxisPair::XT, 5, 7, 1, 0.0);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 7; ++j) p.at(i, j, 0) = f[i][j];
  }
  for (int t = 0; t < 200; ++t) {
    const double a = u(rng), b = u(rng);
    EXPECT_NEAR(bilinear_query(p, a, b)[0], reference_bilinear(f, a, b), 1e-12);
  }
}

PlaneSetConfig small_config(int levels, int dim, int res) {
  PlaneSetConfig c;
  c.spatial_res.assign(levels, res);
  c.temporal_res = res;
  c.feature_dim = dim;
  return c;
}

TEST(FuseFeatures, AllOnesGivesOnes) {
  PlaneSet<double> set(small_config(2, 4, 3));
  std::vector<double> out(4);
  fuse_features(full_view(set), {0.3, 0.6, 0.1, 0.9}, std::span<double>(out));
  for (double v : out) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(FuseFeatures, SinglePlaneOfTwos) {
  PlaneSet<double> set(small_config(2, 4, 3));
  auto& p = set.plane(1, AxisPair::YZ);
  std::fill(p.values.begin(), p.values.end(), 2.0);
  std::vector<double> out(4);
  fuse_features(full_view(set), {0.3, 0.6, 0.1, 0.9}, std::span<double>(out));
  for (double v : out) EXPECT_DOUBLE_EQ(v, 2.0);
}

TEST(FuseFeatures, ProductOfIndependentQueries) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PlaneSet<double> set(small_config(2, 2, 3));
  for (auto& p : set.planes()) {
    for (auto& v : p.values) v = 0.5 + u(rng);
  }
  for (int trial = 0; trial < 20; ++trial) {
    const std::array<double, 4> x = {u(rng), u(rng), u(rng), u(rng)};
    std::vector<double> expected(2, 1.0);
    for (const auto& p : set.planes()) {
      const auto [a, b] = axis_coords(p.axes);
      std::vector<std::vector<double>> f0(3, std::vector<double>(3)), f1 = f0;
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          f0[i][j] = p.at(i, j, 0);
          f1[i][j] = p.at(i, j, 1);
        }
      }
      expected[0] *= reference_bilinear(f0, x[a], x[b]);
      expected[1] *= reference_bilinear(f1, x[a], x[b]);
    }
    std::vector<double> out(2);
    fuse_features(full_view(set), x, std::span<double>(out));
    EXPECT_NEAR(out[0], expected[0], 1e-12);
    EXPECT_NEAR(out[1], expected[1], 1e-12);
  }
}

TEST(FuseFeatures, ConcatLevelsKeepsPerLevelProducts) {
  PlaneSetConfig c = small_config(2, 3, 3);
  c.fusion = FusionMode::ConcatLevels;
  PlaneSet<double> set(c);
  std::fill(set.plane(0, AxisPair::XY).values.begin(),
            set.plane(0, AxisPair::XY).values.end(), 2.0);
  std::fill(set.plane(1, AxisPair::ZT).values.begin(),
            set.plane(1, AxisPair::ZT).values.end(), 3.0);
  ASSERT_EQ(set.feature_width(), 6);
  std::vector<double> out(6);
  fuse_features(full_view(set), {0.2, 0.4, 0.6, 0.8}, std::span<double>(out));
  for (int d = 0; d < 3; ++d) {
    EXPECT_DOUBLE_EQ(out[d], 2.0);
    EXPECT_DOUBLE_EQ(out[3 + d], 3.0);
  }
}

TEST(FuseBackward, OnesPlanesScatterBilinearWeights) {
  PlaneSet<double> set(small_config(1, 3, 3));
  FusionCache<double> cache;
  std::vector<double> out(3);
  const std::array<double, 4> x = {0.25, 0.75, 0.5, 0.1};
  fuse_features(full_view(set), x, std::span<double>(out), &cache);
  PlaneGrads<double> g(set);
  const std::vector<double> up = {1.0, 0.0, 0.0};
  fuse_backward(full_view(set), cache, std::span<const double>(up), g);
  for (std::size_t k = 0; k < set.planes().size(); ++k) {
    const auto& p = set.planes()[k];
    const auto [a, b] = axis_coords(p.axes);
    double total = 0.0;
    for (int i = 0; i < p.res_a; ++i) {
      for (int j = 0; j < p.res_b; ++j) {
        const std::size_t o = p.node_offset(i, j);
        EXPECT_EQ(g.planes[k][o + 1], 0.0);
        EXPECT_EQ(g.planes[k][o + 2], 0.0);
        // Weight of node (i, j) is the hat function product.
        const double wa = std::max(0.0, 1.0 - std::abs(x[a] * (p.res_a - 1) - i));
        const double wb = std::max(0.0, 1.0 - std::abs(x[b] * (p.res_b - 1) - j));
        EXPECT_NEAR(g.planes[k][o], wa * wb, 1e-12);
        total += g.planes[k][o];
      }
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(FuseBackward, ZeroUpstreamAccumulatesNothing) {
  PlaneSet<double> set(small_config(2, 2, 3));
  std::mt19937_64 rng(1);
  set.init_uniform(FieldPart::Static, rng, 0.5, 1.5);
  FusionCache<double> cache;
  std::vector<double> out(2);
  fuse_features(full_view(set), {0.1, 0.2, 0.3, 0.4}, std::span<double>(out), &cache);
  PlaneGrads<double> g(set);
  const std::vector<double> up = {0.0, 0.0};
  fuse_backward(full_view(set), cache, std::span<const double>(up), g);
  for (const auto& p : g.planes) {
    for (double v : p) EXPECT_EQ(v, 0.0);
  }
}

double weighted_output(const PlaneSet<double>& set, const std::array<double, 4>& x,
                       const std::vector<double>& up) {
  std::vector<double> out(up.size());
  fuse_features(full_view(set), x, std::span<double>(out));
  double s = 0.0;
  for (std::size_t d = 0; d < up.size(); ++d) s += up[d] * out[d];
  return s;
}

TEST(FuseBackward, MatchesFiniteDifferences) {
  for (FusionMode mode : {FusionMode::Product, FusionMode::ConcatLevels}) {
    PlaneSetConfig c = small_config(2, 3, 4);
    c.fusion = mode;
    PlaneSet<double> set(c);
    std::mt19937_64 rng(5);
    set.init_uniform(FieldPart::Static, rng, 0.5, 1.5);
    set.init_uniform(FieldPart::Dynamic, rng, 0.5, 1.5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> up(set.feature_width());
    for (auto& v : up) v = u(rng);
    const std::array<double, 4> x = {0.31, 0.62, 0.17, 0.83};

    FusionCache<double> cache;
    std::vector<double> out(up.size());
    fuse_features(full_view(set), x, std::span<double>(out), &cache);
    PlaneGrads<double> g(set);
    fuse_backward(full_view(set), cache, std::span<const double>(up), g);

    const double h = 1e-6;
    for (std::size_t k = 0; k < set.planes().size(); ++k) {
      auto& vals = set.planes()[k].values;
      for (std::size_t i = 0; i < vals.size(); ++i) {
        const double keep = vals[i];
        vals[i] = keep + h;
        const double fp = weighted_output(set, x, up);
        vals[i] = keep - h;
        const double fm = weighted_output(set, x, up);
        vals[i] = keep;
        const double fd = (fp - fm) / (2 * h);
        EXPECT_NEAR(g.planes[k][i], fd, 1e-4 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST(ForceIdentity, DynamicForcedUsesStaticOnly) {
  PlaneSet<double> set(small_config(2, 2, 3));
  std::mt19937_64 rng(9);
  set.init_uniform(FieldPart::Static, rng, 0.5, 1.5);
  set.init_uniform(FieldPart::Dynamic, rng, 0.5, 1.5);
  const std::array<double, 4> x = {0.4, 0.3, 0.2, 0.6};

  PlaneSet<double> only_static = set;
  only_static.fill(FieldPart::Dynamic, 1.0);
  PlaneSet<double> only_dynamic = set;
  only_dynamic.fill(FieldPart::Static, 1.0);

  std::vector<double> a(2), b(2), c(2), d(2);
  fuse_features(force_field_to_identity(set, FieldPart::Dynamic), x, std::span<double>(a));
  fuse_features(full_view(only_static), x, std::span<double>(b));
  fuse_features(force_field_to_identity(set, FieldPart::Static), x, std::span<double>(c));
  fuse_features(full_view(only_dynamic), x, std::span<double>(d));
  for (int i = 0; i < 2; ++i) {
    EXPECT_DOUBLE_EQ(a[i], b[i]);
    EXPECT_DOUBLE_EQ(c[i], d[i]);
  }
  // The view leaves stored parameters untouched.
  EXPECT_NE(set.plane(0, AxisPair::XT).values[0], 1.0);
}

TEST(ForceIdentity, FreshDynamicPlanesAreAlreadyIdentity) {
  PlaneSet<double> set(small_config(2, 4, 5));
  std::mt19937_64 rng(2);
  set.init_uniform(FieldPart::Static, rng, 0.9, 1.1);
  std::vector<double> a(4), b(4);
  const std::array<double, 4> x = {0.9, 0.1, 0.5, 0.3};
  fuse_features(full_view(set), x, std::span<double>(a));
  fuse_features(force_field_to_identity(set, FieldPart::Dynamic), x, std::span<double>(b));
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(a[i], b[i]);
}

TEST(PlaneSet, LayoutAndValidation) {
  PlaneSet<float> set(small_config(3, 5, 4));
  EXPECT_EQ(set.planes().size(), 18u);
  EXPECT_EQ(set.plane(2, AxisPair::ZT).axes, AxisPair::ZT);
  EXPECT_EQ(set.planes()[PlaneSet<float>::index(1, AxisPair::XZ)].axes, AxisPair::XZ);
  PlaneSetConfig bad = small_config(1, 2, 3);
  bad.temporal_res = 1;
  EXPECT_THROW(PlaneSet<float>{bad}, UsageError);
  bad = small_config(1, 2, 1);
  bad.temporal_res = 3;
  EXPECT_THROW(PlaneSet<float>{bad}, UsageError);
}

}  // namespace
}  // namespace forplane
