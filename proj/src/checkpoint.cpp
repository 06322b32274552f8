// SPDX-License-Identifier: Apache-2.0
#include "forplane/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

namespace forplane {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'F', 'P', 'L', 'N'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

void put_floats(std::vector<std::uint8_t>& out, std::span<const float> v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
  out.insert(out.end(), p, p + v.size_bytes());
}

template <typename Rng>
std::string rng_text(const Rng& r) {
  std::ostringstream s;
  s << r;
  return s.str();
}

template <typename Rng>
void rng_from(Rng& r, const std::string& text) {
  std::istringstream s(text);
  s >> r;
  if (!s) throw CheckpointError(CheckpointError::Kind::Header, "checkpoint: bad RNG state");
}

std::vector<std::span<const float>> parameter_spans(const TrainState& st) {
  std::vector<std::span<const float>> out;
  for (const auto& p : st.model.planes.planes()) out.emplace_back(p.values);
  for (const Dense<float>* l : st.model.mlp.layers()) {
    out.emplace_back(l->weight);
    out.emplace_back(l->bias);
  }
  return out;
}

json scene_json(const SceneInfo& s) {
  json j;
  j["width"] = s.width;
  j["height"] = s.height;
  j["fx"] = s.fx;
  j["fy"] = s.fy;
  j["cx"] = s.cx;
  j["cy"] = s.cy;
  j["near"] = s.near;
  j["far"] = s.far;
  j["depth_scale"] = s.depth_scale;
  j["aabb_min"] = {s.aabb.min[0], s.aabb.min[1], s.aabb.min[2]};
  j["aabb_max"] = {s.aabb.max[0], s.aabb.max[1], s.aabb.max[2]};
  j["taus"] = s.taus;
  json poses = json::array();
  for (const auto& p : s.poses) {
    std::vector<double> v(16);
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) v[4 * r + c] = p(r, c);
    }
    poses.push_back(v);
  }
  j["poses"] = poses;
  return j;
}

SceneInfo scene_from(const json& j) {
  SceneInfo s;
  s.width = j.at("width");
  s.height = j.at("height");
  s.fx = j.at("fx");
  s.fy = j.at("fy");
  s.cx = j.at("cx");
  s.cy = j.at("cy");
  s.near = j.at("near");
  s.far = j.at("far");
  s.depth_scale = j.at("depth_scale");
  const auto lo = j.at("aabb_min").get<std::vector<double>>();
  const auto hi = j.at("aabb_max").get<std::vector<double>>();
  s.aabb.min = Vec3(lo.at(0), lo.at(1), lo.at(2));
  s.aabb.max = Vec3(hi.at(0), hi.at(1), hi.at(2));
  s.taus = j.at("taus").get<std::vector<double>>();
  for (const auto& pj : j.at("poses")) {
    const auto v = pj.get<std::vector<double>>();
    Mat4 p;
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) p(r, c) = v.at(4 * r + c);
    }
    s.poses.push_back(p);
  }
  return s;
}

std::size_t float_count(const TrainState& st) {
  std::size_t params = 0;
  for (const auto& s : parameter_spans(st)) params += s.size();
  return 3 * params + st.grid.cell_count();
}

}  // namespace

std::vector<std::uint8_t> save_checkpoint(const TrainState& st) {
  json h;
  h["config"] = st.config.to_json();
  h["iteration"] = st.iteration;
  h["adam_step"] = st.adam.step;
  h["scene"] = scene_json(st.scene);
  h["grid"] = {{"dims", st.grid.dims()},
               {"threshold", st.grid.threshold()},
               {"ema", st.grid.ema()},
               {"t_min", st.grid.t_min()}};
  h["rng"] = {{"sampler", rng_text(st.sampler_rng)},
              {"occupancy", rng_text(st.occupancy_rng)}};
  json planes = json::array();
  for (const auto& p : st.model.planes.planes()) {
    planes.push_back({std::string(axis_name(p.axes)), p.res_a, p.res_b, p.dim});
  }
  json layers = json::array();
  for (const Dense<float>* l : st.model.mlp.layers()) layers.push_back({l->out, l->in});
  h["shapes"] = {{"planes", planes}, {"mlp", layers}};
  h["blob_floats"] = float_count(st);
  const std::string header = h.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, header.size());
  out.insert(out.end(), header.begin(), header.end());
  const auto params = parameter_spans(st);
  for (const auto& s : params) put_floats(out, s);
  for (const auto& m : st.adam.m) put_floats(out, m);
  for (const auto& v : st.adam.v) put_floats(out, v);
  put_floats(out, st.grid.density_cache());
  return out;
}

TrainState load_checkpoint(std::span<const std::uint8_t> bytes) {
  using Kind = CheckpointError::Kind;
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError(Kind::Magic, "checkpoint: bad magic (expected FPLN)");
  }
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + 4, 4);
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::Version, "checkpoint: version " + std::to_string(version) +
                                             ", expected " +
                                             std::to_string(kCheckpointVersion));
  }
  std::uint64_t header_len;
  std::memcpy(&header_len, bytes.data() + 8, 8);
  if (header_len > bytes.size() - 16) {
    throw CheckpointError(Kind::Length, "checkpoint: header of " + std::to_string(header_len) +
                                            " bytes exceeds file size " +
                                            std::to_string(bytes.size()));
  }
  const std::string text(reinterpret_cast<const char*>(bytes.data() + 16), header_len);
  const json h = json::parse(text, nullptr, false);
  if (h.is_discarded()) throw CheckpointError(Kind::Header, "checkpoint: header is not JSON");

  TrainState st;
  try {
    st.config = Config::from_json(h.at("config"));
    st.iteration = h.at("iteration");
    st.adam.step = h.at("adam_step");
    st.scene = scene_from(h.at("scene"));
    const json& g = h.at("grid");
    const double threshold = g.at("threshold");
    st.grid = IndicatorGrid(g.at("dims").get<std::array<int, 4>>(), threshold, g.at("ema"),
                            g.at("t_min"), threshold);
    rng_from(st.sampler_rng, h.at("rng").at("sampler"));
    rng_from(st.occupancy_rng, h.at("rng").at("occupancy"));
  } catch (const json::exception& e) {
    throw CheckpointError(Kind::Header, std::string("checkpoint: bad header: ") + e.what());
  } catch (const UsageError& e) {
    throw CheckpointError(Kind::Header, std::string("checkpoint: bad config: ") + e.what());
  }
  st.model = FieldModel<float>(st.config.field);
  {
    FieldGrads<float> g(st.model);
    st.adam.reset(param_groups(st.model, g, 1.0, 1.0));
    st.adam.step = h.at("adam_step");
  }
  json planes = json::array();
  for (const auto& p : st.model.planes.planes()) {
    planes.push_back({std::string(axis_name(p.axes)), p.res_a, p.res_b, p.dim});
  }
  if (planes != h.at("shapes").at("planes")) {
    throw CheckpointError(Kind::Header, "checkpoint: plane shapes do not match the config");
  }

  const std::size_t expected = float_count(st);
  const std::size_t actual_bytes = bytes.size() - 16 - header_len;
  if (h.value("blob_floats", std::size_t{0}) != expected || actual_bytes != expected * 4) {
    throw CheckpointError(Kind::Length, "checkpoint: expected " + std::to_string(expected * 4) +
                                            " parameter bytes, found " +
                                            std::to_string(actual_bytes));
  }
  const std::uint8_t* cursor = bytes.data() + 16 + header_len;
  auto take = [&](std::span<float> dst) {
    std::memcpy(dst.data(), cursor, dst.size_bytes());
    cursor += dst.size_bytes();
  };
  for (auto& p : st.model.planes.planes()) take(p.values);
  for (Dense<float>* l : st.model.mlp.layers()) {
    take(l->weight);
    take(l->bias);
  }
  for (auto& m : st.adam.m) take(m);
  for (auto& v : st.adam.v) take(v);
  std::vector<float> cache(st.grid.cell_count());
  take(cache);
  st.grid.set_density_cache(std::move(cache));
  return st;
}

void write_checkpoint(const std::filesystem::path& path, const TrainState& state) {
  const auto bytes = save_checkpoint(state);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

TrainState read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return load_checkpoint(bytes);
}

}  // namespace forplane
