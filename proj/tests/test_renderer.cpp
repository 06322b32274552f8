// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <Eigen/Geometry>
#include <random>

#include "forplane/dataio.hpp"
#include "forplane/field_model.hpp"
#include "forplane/renderer.hpp"

namespace forplane {
namespace {

using Samples = std::vector<SampleRadiance<double>>;

TEST(Camera, PrincipalRayPointsForward) {
  Camera cam;
  cam.fx = cam.fy = 40.0;
  cam.cx = cam.cy = 10.5;
  cam.width = cam.height = 21;
  const Ray r = ray_for_pixel(cam, 10, 10, 0.0);
  EXPECT_NEAR((r.dir - Vec3::UnitZ()).norm(), 0.0, 1e-15);
}

TEST(Camera, FortyFiveDegrees) {
  Camera cam;
  cam.fx = cam.fy = 100.0;
  cam.cx = cam.cy = 50.5;
  cam.width = cam.height = 200;
  const Ray r = ray_for_pixel(cam, 50, 150, 0.0);
  EXPECT_NEAR(r.dir.x(), 1 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(r.dir.y(), 0.0, 1e-12);
  EXPECT_NEAR(r.dir.z(), 1 / std::sqrt(2.0), 1e-12);
}

TEST(Camera, DirectionsAreUnitAndPoseApplies) {
  Camera cam;
  cam.fx = 30;
  cam.fy = 45;
  cam.cx = 7;
  cam.cy = 3;
  cam.width = 16;
  cam.height = 12;
  cam.pose.block<3, 3>(0, 0) =
      Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  cam.pose.block<3, 1>(0, 3) = Vec3(1, -2, 0.5);
  for (int r = 0; r < 12; ++r) {
    for (int c = 0; c < 16; ++c) {
      const Ray ray = ray_for_pixel(cam, r, c, 0.25);
      EXPECT_NEAR(ray.dir.norm(), 1.0, 1e-6);
      EXPECT_EQ(ray.origin, Vec3(1, -2, 0.5));
    }
  }
  cam.pose(0, 0) = 2.0;
  EXPECT_THROW(cam.validate(), DataError);
}

TEST(Composite, HalfAlphaSingleSample) {
  const Samples s = {{std::log(2.0), {0.2, 0.4, 0.8}, 1.0, 3.0}};
  const auto out = composite<double>(s);
  EXPECT_NEAR(out.opacity, 0.5, 1e-15);
  EXPECT_NEAR(out.rgb[0], 0.1, 1e-15);
  EXPECT_NEAR(out.rgb[2], 0.4, 1e-15);
  EXPECT_NEAR(out.depth_raw, 1.5, 1e-15);
}

TEST(Composite, ConstantDensityConvergesToAnalytic) {
  const double sigma = 1.3, tn = 0.5, tf = 2.0;
  const int n = 1024;
  const double d = (tf - tn) / n;
  Samples s;
  for (int k = 0; k < n; ++k) s.push_back({sigma, {1, 1, 1}, d, tn + (k + 0.5) * d});
  const auto out = composite<double>(s);
  const double L = tf - tn;
  EXPECT_NEAR(out.opacity, 1 - std::exp(-sigma * L), 1e-3);
  // Expected depth: integral of t sigma exp(-sigma (t - tn)) over [tn, tf].
  const double e = std::exp(-sigma * L);
  const double depth = tn * (1 - e) + (1 - e) / sigma - L * e;
  EXPECT_NEAR(out.depth_raw, depth, 1e-3);
}

TEST(Composite, OpaqueFirstSampleHidesTheRest) {
  const Samples s = {{1e6, {1, 0, 0}, 0.1, 0.7},
                     {5.0, {0, 1, 0}, 0.1, 0.8},
                     {5.0, {0, 0, 1}, 0.1, 0.9}};
  const auto out = composite<double>(s);
  EXPECT_DOUBLE_EQ(out.rgb[0], 1.0);
  EXPECT_DOUBLE_EQ(out.rgb[1], 0.0);
  EXPECT_DOUBLE_EQ(out.depth_raw, 0.7);
}

TEST(Composite, WeightsBoundedAndTransmittanceMonotone) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  Samples s;
  for (int k = 0; k < 64; ++k) s.push_back({u(rng), {0.5, 0.5, 0.5}, 0.05, 1.0 + k * 0.05});
  CompositeCache<double> cache;
  const auto out = composite<double>(s, &cache);
  EXPECT_GE(out.opacity, 0.0);
  EXPECT_LE(out.opacity, 1.0);
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LE(cache.trans[i], cache.trans[i - 1]);
}

double composite_objective(const Samples& s, const Rgb<double>& dc, double dd, double dop) {
  const auto o = composite<double>(s);
  return dc[0] * o.rgb[0] + dc[1] * o.rgb[1] + dc[2] * o.rgb[2] + dd * o.depth_raw +
         dop * o.opacity;
}

TEST(CompositeBackward, SingleSampleColorGradientIsAlpha) {
  const Samples s = {{0.8, {0.2, 0.3, 0.4}, 0.5, 1.0}};
  CompositeCache<double> cache;
  composite<double>(s, &cache);
  std::vector<SampleGrad<double>> g(1);
  composite_backward<double>(s, cache, {1, 1, 1}, 0, 0, g);
  EXPECT_NEAR(g[0].d_rgb[1], 1 - std::exp(-0.4), 1e-15);
}

TEST(CompositeBackward, SecondWeightWrtFirstDensity) {
  const double s1 = 0.9, s2 = 2.1, d1 = 0.3, d2 = 0.2;
  const Samples s = {{s1, {0, 0, 0}, d1, 0.0}, {s2, {0, 0, 0}, d2, 1.0}};
  CompositeCache<double> cache;
  composite<double>(s, &cache);
  std::vector<SampleGrad<double>> g(2);
  // depth_raw = w_1 * 0 + w_2 * 1 isolates w_2.
  composite_backward<double>(s, cache, {0, 0, 0}, 1.0, 0.0, g);
  const double a1 = 1 - std::exp(-s1 * d1), a2 = 1 - std::exp(-s2 * d2);
  EXPECT_NEAR(g[0].d_sigma, -d1 * (1 - a1) * a2, 1e-15);
  const double h = 1e-6;
  Samples p = s, m = s;
  p[0].sigma += h;
  m[0].sigma -= h;
  EXPECT_NEAR(g[0].d_sigma,
              (composite_objective(p, {0, 0, 0}, 1, 0) - composite_objective(m, {0, 0, 0}, 1, 0)) /
                  (2 * h),
              1e-8);
}

TEST(CompositeBackward, RandomFiniteDifferences) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Samples s;
  for (int k = 0; k < 12; ++k) s.push_back({3 * u(rng), {u(rng), u(rng), u(rng)}, 0.1, 0.5 + 0.1 * k});
  const Rgb<double> dc = {0.3, -0.7, 0.2};
  const double dd = 0.4, dop = -0.25;
  CompositeCache<double> cache;
  composite<double>(s, &cache);
  std::vector<SampleGrad<double>> g(s.size());
  composite_backward<double>(s, cache, dc, dd, dop, g);
  const double h = 1e-6;
  for (std::size_t i = 0; i < s.size(); ++i) {
    Samples p = s, m = s;
    p[i].sigma += h;
    m[i].sigma -= h;
    EXPECT_NEAR(g[i].d_sigma,
                (composite_objective(p, dc, dd, dop) - composite_objective(m, dc, dd, dop)) / (2 * h),
                1e-8);
    for (int c = 0; c < 3; ++c) {
      p = s;
      m = s;
      p[i].rgb[c] += h;
      m[i].rgb[c] -= h;
      EXPECT_NEAR(g[i].d_rgb[c],
                  (composite_objective(p, dc, dd, dop) - composite_objective(m, dc, dd, dop)) /
                      (2 * h),
                  1e-8);
    }
  }
}

TEST(CompositeBackward, ZeroUpstream) {
  const Samples s = {{1.0, {0.1, 0.2, 0.3}, 0.1, 1.0}, {2.0, {0.3, 0.2, 0.1}, 0.1, 1.1}};
  CompositeCache<double> cache;
  composite<double>(s, &cache);
  std::vector<SampleGrad<double>> g(2);
  composite_backward<double>(s, cache, {0, 0, 0}, 0, 0, g);
  for (const auto& x : g) {
    EXPECT_EQ(x.d_sigma, 0.0);
    EXPECT_EQ(x.d_rgb, (Rgb<double>{0, 0, 0}));
  }
}

TEST(EarlyTermination, ChangesColorByLessThanRemainingTransmittance) {
  Ray ray;
  ray.origin = Vec3(0.5, 0.5, -1.0);
  ray.dir = Vec3::UnitZ();
  ray.t_near = 0.5;
  ray.t_far = 2.5;
  Aabb box;
  auto field = [](const SamplePoint& p) {
    FieldOutput<double> f;
    f.sigma = 30.0 * p.coords[2];
    f.rgb = {p.coords[2], 0.5, 1 - p.coords[2]};
    return f;
  };
  RenderSettings full{512, 0.0, false}, cut{512, 1e-4, false};
  const auto a = render_ray<double>(ray, box, nullptr, full, field);
  const auto b = render_ray<double>(ray, box, nullptr, cut, field);
  EXPECT_LT(b.samples, a.samples);
  for (int c = 0; c < 3; ++c) EXPECT_LT(std::abs(a.rgb[c] - b.rgb[c]), 2e-4);
}

TEST(RenderRay, ChunkedMatchesSequential) {
  auto field = [](const SamplePoint& p) {
    FieldOutput<double> f;
    const double r = (Vec3(p.coords[0], p.coords[1], p.coords[2]) - Vec3(0.5, 0.5, 0.5)).norm();
    f.sigma = r < 0.3 ? 25.0 : 0.2;
    f.rgb = {p.coords[0], p.coords[1], p.coords[2]};
    return f;
  };
  Aabb box;
  for (double tmin : {0.0, 1e-4, 0.05}) {
    for (int steps : {7, 31, 32, 33, 200}) {
      Ray ray;
      ray.origin = Vec3(0.45, 0.55, -1.0);
      ray.dir = Vec3(0.05, -0.02, 1.0).normalized();
      ray.t_near = 0.8;
      ray.t_far = 2.2;
      RenderSettings rs{steps, tmin, false};
      const auto a = render_ray<double>(ray, box, nullptr, rs, field);
      const auto b = render_ray_chunked<double>(
          ray, box, nullptr, rs,
          [&](std::span<const SamplePoint> pts, std::size_t) {
            static std::vector<FieldOutput<double>> out;
            out.clear();
            for (const auto& p : pts) out.push_back(field(p));
            return std::span<const FieldOutput<double>>(out);
          });
      EXPECT_EQ(a.samples, b.samples);
      EXPECT_EQ(a.rgb, b.rgb);
      EXPECT_EQ(a.depth, b.depth);
    }
  }
}

TEST(RenderRay, EmptyGridGivesBlack) {
  IndicatorGrid grid({4, 4, 4, 1}, 1.0, 0.5, 1e-4, 2.0);
  grid.fill(0.0f);
  Ray ray;
  ray.origin = Vec3(0.5, 0.5, -1.0);
  ray.t_near = 0.5;
  ray.t_far = 2.5;
  const auto out = render_ray<double>(ray, Aabb{}, &grid, RenderSettings{},
                                      [](const SamplePoint&) {
                                        return FieldOutput<double>{5.0, {1, 1, 1}};
                                      });
  EXPECT_EQ(out.samples, 0);
  EXPECT_EQ(out.opacity, 0.0);
  EXPECT_EQ(out.depth, 0.0);
  EXPECT_EQ(out.rgb, (Rgb<double>{0, 0, 0}));
}

TEST(RenderRay, FullGridMatchesDense) {
  IndicatorGrid grid({4, 4, 4, 2}, 1.0, 0.5, 1e-4, 2.0);
  Ray ray;
  ray.origin = Vec3(0.3, 0.6, -1.0);
  ray.dir = Vec3(0.1, 0.0, 1.0).normalized();
  ray.t_near = 0.5;
  ray.t_far = 2.5;
  auto field = [](const SamplePoint& p) {
    return FieldOutput<double>{4.0 * p.coords[0], {0.2, 0.4, 0.6}};
  };
  const auto a = render_ray<double>(ray, Aabb{}, nullptr, RenderSettings{}, field);
  const auto b = render_ray<double>(ray, Aabb{}, &grid, RenderSettings{}, field);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.rgb, b.rgb);
  EXPECT_EQ(a.depth, b.depth);
}

TEST(RenderRay, NormalizedDepth) {
  Ray ray;
  ray.origin = Vec3(0.5, 0.5, -1.0);
  ray.t_near = 0.5;
  ray.t_far = 2.5;
  RenderSettings rs;
  rs.normalize_depth = true;
  rs.t_min = 0.0;
  auto field = [](const SamplePoint&) { return FieldOutput<double>{0.5, {1, 1, 1}}; };
  const auto out = render_ray<double>(ray, Aabb{}, nullptr, rs, field);
  EXPECT_NEAR(out.depth, out.depth_raw / out.opacity, 1e-15);
  EXPECT_GT(out.depth, 1.0);
  EXPECT_LT(out.depth, 2.0);
}

TEST(RenderRay, SphereFieldMatchesDenseOracle) {
  SynthConfig cfg;
  cfg.width = cfg.height = 16;
  cfg.focal = 70.0 * 16 / 64;
  SphereOracle oracle;
  Camera cam;
  cam.width = cam.height = 16;
  cam.fx = cam.fy = cfg.focal;
  cam.cx = cam.cy = 8.0;
  cam.near = cfg.near;
  cam.far = cfg.far;
  cam.pose.block<3, 1>(0, 3) = Vec3(0.5, 0.5, -cfg.camera_distance);
  auto field = [&](const SamplePoint& p) {
    const auto c = oracle.color_normalized(p.coords);
    return FieldOutput<double>{oracle.density_normalized(p.coords), {c[0], c[1], c[2]}};
  };
  RenderSettings rs{512, 0.0, false};
  double worst = 0.0;
  for (int r = 0; r < 16; r += 3) {
    for (int c = 0; c < 16; c += 3) {
      const double tau = 0.3;
      const Ray ray = ray_for_pixel(cam, r, c, tau);
      const auto got = render_ray<double>(ray, oracle.aabb, nullptr, rs, field);
      const auto want = render_oracle_pixel(oracle, cam, r, c, tau, 8192);
      for (int ch = 0; ch < 3; ++ch) worst = std::max(worst, std::abs(got.rgb[ch] - want.rgb[ch]));
    }
  }
  EXPECT_LT(worst, 1e-2);
}

}  // namespace
}  // namespace forplane
