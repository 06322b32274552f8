// SPDX-License-Identifier: Apache-2.0
#include "forplane/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "forplane/renderer.hpp"

namespace forplane {

namespace fs = std::filesystem;
using nlohmann::json;

Camera Dataset::camera(std::size_t frame) const {
  Camera c;
  c.fx = fx;
  c.fy = fy;
  c.cx = cx;
  c.cy = cy;
  c.width = width;
  c.height = height;
  c.near = near;
  c.far = far;
  c.pose = frames.at(frame).pose;
  return c;
}

bool Dataset::has_depth() const {
  return !frames.empty() &&
         std::all_of(frames.begin(), frames.end(),
                     [](const Frame& f) { return !f.depth.empty(); });
}

MaskStack Dataset::mask_stack() const {
  MaskStack s;
  for (const auto& f : frames) {
    s.images.push_back(f.image);
    s.masks.push_back(f.mask);
  }
  return s;
}

void Dataset::validate() const {
  if (frames.empty()) throw DataError("dataset has no frames");
  if (width < 1 || height < 1) throw DataError("dataset has empty image size");
  if (!(fx > 0.0) || !(fy > 0.0)) throw DataError("focal lengths must be positive");
  if (!(depth_scale > 0.0)) throw DataError("depth_scale must be positive");
  if (!(aabb.extent().array() > 0.0).all()) throw DataError("aabb is empty");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Frame& f = frames[i];
    const std::string tag = "frame " + std::to_string(i);
    if (f.image.width != width || f.image.height != height || f.image.channels != 3) {
      throw DataError(tag + ": image shape does not match meta.json");
    }
    if (f.mask.width != width || f.mask.height != height || f.mask.channels != 1) {
      throw DataError(tag + ": mask shape does not match meta.json");
    }
    for (float m : f.mask.data) {
      if (m != 0.0f && m != 1.0f) throw DataError(tag + ": mask is not binary");
    }
    if (!f.depth.empty() &&
        (f.depth.width != width || f.depth.height != height || f.depth.channels != 1)) {
      throw DataError(tag + ": depth shape does not match meta.json");
    }
    camera(i).validate();
  }
}

void assign_normalized_time(Dataset& ds) {
  if (ds.frames.empty()) return;
  double lo = ds.frames.front().time, hi = lo;
  for (const auto& f : ds.frames) {
    lo = std::min(lo, f.time);
    hi = std::max(hi, f.time);
  }
  for (auto& f : ds.frames) f.tau = hi > lo ? (f.time - lo) / (hi - lo) : 0.0;
}

namespace {

template <typename T>
T required(const json& j, const std::string& key, const fs::path& file) {
  if (!j.contains(key)) {
    throw DataError(file.string() + ": missing key '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError(file.string() + ": bad value for '" + key + "': " + e.what());
  }
}

Vec3 vec3_from(const std::vector<double>& v, const std::string& key,
               const fs::path& file) {
  if (v.size() != 3) throw DataError(file.string() + ": '" + key + "' needs 3 values");
  return Vec3(v[0], v[1], v[2]);
}

Image load_color(const fs::path& path, int w, int h) {
  const PngData png = read_png(path);
  if (png.bit_depth != 8 || png.channels != 3) {
    throw DataError(path.string() + ": expected 8-bit RGB");
  }
  if (png.width != w || png.height != h) {
    throw DataError(path.string() + ": size " + std::to_string(png.width) + "x" +
                    std::to_string(png.height) + " does not match meta.json");
  }
  Image img(w, h, 3);
  for (std::size_t i = 0; i < png.samples.size(); ++i) img.data[i] = png.samples[i] / 255.0f;
  return img;
}

Image load_mask(const fs::path& path, int w, int h) {
  const PngData png = read_png(path);
  if (png.bit_depth != 8 || png.channels != 1) {
    throw DataError(path.string() + ": expected 8-bit gray mask");
  }
  if (png.width != w || png.height != h) {
    throw DataError(path.string() + ": mask size does not match meta.json");
  }
  Image img(w, h, 1);
  for (std::size_t i = 0; i < png.samples.size(); ++i) {
    const auto v = png.samples[i];
    if (v != 0 && v != 255) {
      throw DataError(path.string() + ": mask value " + std::to_string(v) +
                      " is neither 0 nor 255");
    }
    img.data[i] = v == 255 ? 1.0f : 0.0f;
  }
  return img;
}

Image load_depth(const fs::path& path, int w, int h, double scale) {
  const PngData png = read_png(path);
  if (png.bit_depth != 16 || png.channels != 1) {
    throw DataError(path.string() + ": expected 16-bit gray depth");
  }
  if (png.width != w || png.height != h) {
    throw DataError(path.string() + ": depth size does not match meta.json");
  }
  Image img(w, h, 1);
  for (std::size_t i = 0; i < png.samples.size(); ++i) {
    img.data[i] = static_cast<float>(png.samples[i] * scale);
  }
  return img;
}

}  // namespace

std::string frame_name(const std::string& prefix, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%03zu", index);
  return prefix + "_" + buf + ".png";
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path meta_path = dir / "meta.json";
  std::ifstream in(meta_path);
  if (!in) throw DataError("missing " + meta_path.string());
  json meta;
  try {
    in >> meta;
  } catch (const json::exception& e) {
    throw DataError(meta_path.string() + ": " + e.what());
  }
  Dataset ds;
  ds.width = required<int>(meta, "width", meta_path);
  ds.height = required<int>(meta, "height", meta_path);
  ds.fx = required<double>(meta, "fx", meta_path);
  ds.fy = required<double>(meta, "fy", meta_path);
  ds.cx = required<double>(meta, "cx", meta_path);
  ds.cy = required<double>(meta, "cy", meta_path);
  ds.near = required<double>(meta, "near", meta_path);
  ds.far = required<double>(meta, "far", meta_path);
  ds.depth_scale = required<double>(meta, "depth_scale", meta_path);
  ds.aabb.min = vec3_from(required<std::vector<double>>(meta, "aabb_min", meta_path),
                          "aabb_min", meta_path);
  ds.aabb.max = vec3_from(required<std::vector<double>>(meta, "aabb_max", meta_path),
                          "aabb_max", meta_path);
  const json frames = required<json>(meta, "frames", meta_path);
  if (!frames.is_array() || frames.empty()) {
    throw DataError(meta_path.string() + ": 'frames' must be a non-empty array");
  }
  for (const auto& fj : frames) {
    Frame f;
    const fs::path image = dir / required<std::string>(fj, "image", meta_path);
    const fs::path mask = dir / required<std::string>(fj, "mask", meta_path);
    f.image = load_color(image, ds.width, ds.height);
    f.mask = load_mask(mask, ds.width, ds.height);
    if (fj.contains("depth") && !fj.at("depth").is_null()) {
      f.depth = load_depth(dir / fj.at("depth").get<std::string>(), ds.width,
                           ds.height, ds.depth_scale);
    }
    f.time = required<double>(fj, "time", meta_path);
    const auto pose = required<std::vector<double>>(fj, "pose", meta_path);
    if (pose.size() != 16) {
      throw DataError(meta_path.string() + ": pose of " + image.filename().string() +
                      " needs 16 values");
    }
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) f.pose(r, c) = pose[4 * r + c];
    }
    if (!is_orthonormal(f.pose.block<3, 3>(0, 0))) {
      throw DataError(meta_path.string() + ": pose of " + image.filename().string() +
                      " is not orthonormal");
    }
    ds.frames.push_back(std::move(f));
  }
  std::stable_sort(ds.frames.begin(), ds.frames.end(),
                   [](const Frame& a, const Frame& b) { return a.time < b.time; });
  assign_normalized_time(ds);
  try {
    ds.validate();
  } catch (const DataError& e) {
    throw DataError(meta_path.string() + ": " + e.what());
  }
  return ds;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  ds.validate();
  for (const char* sub : {"images", "masks", "depth"}) {
    std::error_code ec;
    fs::create_directories(dir / sub, ec);
    if (ec) throw DataError("cannot create " + (dir / sub).string());
  }
  json meta;
  meta["width"] = ds.width;
  meta["height"] = ds.height;
  meta["fx"] = ds.fx;
  meta["fy"] = ds.fy;
  meta["cx"] = ds.cx;
  meta["cy"] = ds.cy;
  meta["near"] = ds.near;
  meta["far"] = ds.far;
  meta["depth_scale"] = ds.depth_scale;
  meta["aabb_min"] = {ds.aabb.min[0], ds.aabb.min[1], ds.aabb.min[2]};
  meta["aabb_max"] = {ds.aabb.max[0], ds.aabb.max[1], ds.aabb.max[2]};
  json frames = json::array();
  for (std::size_t i = 0; i < ds.frames.size(); ++i) {
    const Frame& f = ds.frames[i];
    json fj;
    const std::string image = "images/" + frame_name("frame", i);
    const std::string mask = "masks/" + frame_name("frame", i);
    write_png8(dir / image, f.image);
    write_png8(dir / mask, f.mask);
    fj["image"] = image;
    fj["mask"] = mask;
    if (!f.depth.empty()) {
      const std::string depth = "depth/" + frame_name("frame", i);
      write_png16(dir / depth, f.depth, ds.depth_scale);
      fj["depth"] = depth;
    }
    fj["time"] = f.time;
    std::vector<double> pose(16);
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) pose[4 * r + c] = f.pose(r, c);
    }
    fj["pose"] = pose;
    frames.push_back(std::move(fj));
  }
  meta["frames"] = std::move(frames);
  std::ofstream out(dir / "meta.json");
  if (!out) throw DataError("cannot write " + (dir / "meta.json").string());
  out << meta.dump(2) << "\n";
}

Vec3 SphereOracle::center_at(double tau) const {
  return center + amplitude * std::sin(2.0 * std::numbers::pi * tau) * motion;
}

double SphereOracle::density(const Vec3& world, double tau) const {
  return (world - center_at(tau)).squaredNorm() <= radius * radius ? sigma0 : 0.0;
}

Rgb<double> SphereOracle::color(const Vec3& world) const {
  const Vec3 u = aabb.normalize(world);
  return {0.15 + 0.7 * clamp01(u[0]), 0.15 + 0.7 * clamp01(u[1]),
          0.15 + 0.7 * clamp01(u[2])};
}

double SphereOracle::density_normalized(const std::array<double, 4>& c) const {
  return density(aabb.denormalize(Vec3(c[0], c[1], c[2])), c[3]);
}

Rgb<double> SphereOracle::color_normalized(const std::array<double, 4>& c) const {
  return color(aabb.denormalize(Vec3(c[0], c[1], c[2])));
}

OraclePixel render_oracle_pixel(const SphereOracle& oracle, const Camera& cam,
                                int row, int col, double tau, int steps) {
  const Ray ray = ray_for_pixel(cam, row, col, tau);
  // A ray missing the sphere sees zero density everywhere.
  const Vec3 oc = ray.origin - oracle.center_at(tau);
  const double b = oc.dot(ray.dir);
  if (b * b - (oc.squaredNorm() - oracle.radius * oracle.radius) < 0.0) return {};
  RayMarcher marcher(nullptr, ray, oracle.aabb, steps, 0.0);
  std::vector<SampleRadiance<double>> samples;
  while (auto p = marcher.next(1.0)) {
    const Vec3 world = ray.origin + p->t * ray.dir;
    const double sigma = oracle.density(world, tau);
    if (sigma == 0.0) continue;  // contributes exactly nothing
    samples.push_back({sigma, oracle.color(world), p->delta, p->t});
  }
  const auto out = composite<double>(samples);
  return {out.rgb, out.depth_raw, out.opacity};
}

SyntheticScene generate_synthetic(const SynthConfig& cfg) {
  if (cfg.width < 1 || cfg.height < 1 || cfg.frames < 1) {
    throw UsageError("synthetic scene needs positive size and frame count");
  }
  SyntheticScene scene;
  SphereOracle& o = scene.oracle;
  o.radius = cfg.radius;
  o.amplitude = cfg.amplitude;
  o.sigma0 = cfg.sigma0;

  Dataset& ds = scene.dataset;
  ds.width = cfg.width;
  ds.height = cfg.height;
  ds.fx = ds.fy = cfg.focal * cfg.width / 64.0;
  ds.cx = cfg.width / 2.0;
  ds.cy = cfg.height / 2.0;
  ds.near = cfg.near;
  ds.far = cfg.far;
  ds.depth_scale = cfg.depth_scale;
  ds.aabb = o.aabb;
  Mat4 pose = Mat4::Identity();
  pose.block<3, 1>(0, 3) = Vec3(0.5, 0.5, -cfg.camera_distance);

  const int side = std::max(1, static_cast<int>(std::lround(cfg.occluder_size * cfg.width)));
  for (int i = 0; i < cfg.frames; ++i) {
    Frame f;
    f.time = normalized_time(i, cfg.frames);
    f.tau = f.time;
    f.pose = pose;
    f.image = Image(cfg.width, cfg.height, 3);
    f.depth = Image(cfg.width, cfg.height, 1);
    f.mask = Image(cfg.width, cfg.height, 1, 1.0f);
    Image opacity(cfg.width, cfg.height, 1);
    Camera cam;
    cam.fx = ds.fx;
    cam.fy = ds.fy;
    cam.cx = ds.cx;
    cam.cy = ds.cy;
    cam.width = ds.width;
    cam.height = ds.height;
    cam.near = ds.near;
    cam.far = ds.far;
    cam.pose = pose;
    for (int r = 0; r < cfg.height; ++r) {
      for (int c = 0; c < cfg.width; ++c) {
        const OraclePixel px = render_oracle_pixel(o, cam, r, c, f.tau, cfg.quadrature_steps);
        for (int ch = 0; ch < 3; ++ch) f.image.at(r, c, ch) = static_cast<float>(px.rgb[ch]);
        opacity.at(r, c) = static_cast<float>(px.opacity);
        f.depth.at(r, c) =
            px.opacity >= cfg.depth_min_opacity ? static_cast<float>(px.depth) : 0.0f;
      }
    }
    scene.clean.push_back(f.image);
    scene.opacity.push_back(std::move(opacity));
    if (cfg.occluder) {
      // A square tool sweeping horizontally across the lower-middle rows.
      const double phase = 0.5 * (1.0 + std::sin(2.0 * std::numbers::pi * f.tau));
      const int x0 = static_cast<int>(std::lround(phase * (cfg.width - side)));
      const int y0 = static_cast<int>(std::lround(0.55 * (cfg.height - side)));
      for (int r = y0; r < std::min(cfg.height, y0 + side); ++r) {
        for (int c = x0; c < std::min(cfg.width, x0 + side); ++c) {
          f.mask.at(r, c) = 0.0f;
          f.depth.at(r, c) = 0.0f;
          for (int ch = 0; ch < 3; ++ch) f.image.at(r, c, ch) = cfg.occluder_gray;
        }
      }
    }
    ds.frames.push_back(std::move(f));
  }
  return scene;
}

void distort_depth(Dataset& ds, double a, double b) {
  for (auto& f : ds.frames) {
    for (float& d : f.depth.data) {
      if (d > 0.0f) d = static_cast<float>(a * d + b);
    }
  }
}

std::vector<fs::path> write_outputs(const std::vector<Image>& colors,
                                    const std::vector<Image>& depths,
                                    const std::vector<Image>& references,
                                    double depth_scale, const fs::path& dir) {
  if (colors.empty()) throw UsageError("no renders to write");
  if (depths.size() != colors.size() || references.size() != colors.size()) {
    throw UsageError("write_outputs needs one depth and reference per render");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create " + dir.string());
  std::vector<fs::path> written;
  for (std::size_t i = 0; i < colors.size(); ++i) {
    const Image& c = colors[i];
    const Image& ref = references[i];
    if (!c.same_shape(ref)) throw UsageError("render and reference shapes differ");
    Image diff(c.width, c.height, c.channels);
    for (std::size_t k = 0; k < c.data.size(); ++k) {
      diff.data[k] = std::abs(c.data[k] - ref.data[k]);
    }
    written.push_back(dir / frame_name("color", i));
    write_png8(written.back(), c);
    written.push_back(dir / frame_name("depth", i));
    write_png16(written.back(), depths[i], depth_scale);
    written.push_back(dir / frame_name("diff", i));
    write_png8(written.back(), diff);
  }
  return written;
}

}  // namespace forplane
