// SPDX-License-Identifier: Apache-2.0
#include "forplane/trainer.hpp"

#include <chrono>
#include <cstdio>

#include "forplane/parallel.hpp"

namespace forplane {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
      .count();
}

}  // namespace

SceneInfo SceneInfo::from(const Dataset& ds) {
  SceneInfo s;
  s.width = ds.width;
  s.height = ds.height;
  s.fx = ds.fx;
  s.fy = ds.fy;
  s.cx = ds.cx;
  s.cy = ds.cy;
  s.near = ds.near;
  s.far = ds.far;
  s.depth_scale = ds.depth_scale;
  s.aabb = ds.aabb;
  for (const auto& f : ds.frames) {
    s.taus.push_back(f.tau);
    s.poses.push_back(f.pose);
  }
  return s;
}

Camera SceneInfo::camera(std::size_t frame) const {
  Camera c;
  c.fx = fx;
  c.fy = fy;
  c.cx = cx;
  c.cy = cy;
  c.width = width;
  c.height = height;
  c.near = near;
  c.far = far;
  c.pose = poses.at(frame);
  return c;
}

IndicatorGrid make_grid(const OccupancyConfig& cfg, const RenderSettings& render,
                        double near, double far) {
  const double threshold =
      cfg.threshold > 0.0 ? cfg.threshold : 0.01 * render.steps / (far - near);
  const double init = cfg.init_density > 0.0 ? cfg.init_density : threshold;
  return IndicatorGrid(cfg.dims, threshold, cfg.ema, cfg.t_min, init);
}

std::size_t probe_count(const OccupancyConfig& cfg, const IndicatorGrid& grid) {
  if (cfg.probes > 0) return static_cast<std::size_t>(cfg.probes);
  return std::max<std::size_t>(1, grid.cell_count() / 32);
}

TrainState initial_state(const Dataset& ds, const Config& cfg) {
  cfg.validate();
  ds.validate();
  TrainState st;
  st.config = cfg;
  st.config.field = cfg.resolved_field(ds.frames.size());
  validate(st.config.field.encoding.oneblob);
  st.scene = SceneInfo::from(ds);
  st.model = FieldModel<float>(st.config.field);
  std::mt19937_64 init_rng(cfg.train.seed);
  st.model.init(st.config.field, init_rng);
  st.sampler_rng.seed(cfg.train.seed + 1);
  st.occupancy_rng.seed(cfg.train.seed + 2);
  FieldGrads<float> g(st.model);
  st.adam.reset(param_groups(st.model, g, 1.0, 1.0));
  st.grid = make_grid(cfg.occupancy, cfg.render, ds.near, ds.far);
  return st;
}

std::string log_header() {
  return "iteration,total,rgb,depth,tv,ts,de,psnr,psnr_masked,wall_ms";
}

std::string log_line(const TrainLogRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.6f,%.6f,%.3f",
                r.iteration, r.total, r.rgb, r.depth, r.tv, r.ts, r.de, r.psnr,
                r.psnr_masked, r.wall_ms);
  return buf;
}

Trainer::Trainer(const Dataset& ds, const Config& cfg)
    : Trainer(ds, initial_state(ds, cfg)) {}

Trainer::Trainer(const Dataset& ds, TrainState state)
    : ds_(ds), state_(std::move(state)) {
  setup();
}

void Trainer::setup() {
  const Config& cfg = state_.config;
  cfg.validate();
  ds_.validate();
  if (ds_.frames.size() != state_.scene.frames()) {
    throw DataError("dataset frame count does not match the training state");
  }
  if (cfg.loss.depth_mode != DepthMode::None && !ds_.has_depth()) {
    throw DataError("depth_mode " + to_string(cfg.loss.depth_mode) +
                    " needs a depth map for every frame");
  }
  for (std::size_t i = 0; i < ds_.frames.size(); ++i) {
    const bool held_out = cfg.train.holdout == Holdout::Alternate &&
                          ds_.frames.size() > 1 && i % 2 == 1;
    (held_out ? eval_frames_ : train_frames_).push_back(i);
  }
  if (eval_frames_.empty()) eval_frames_ = train_frames_;
  MaskStack stack;
  for (std::size_t i : train_frames_) {
    stack.images.push_back(ds_.frames[i].image);
    stack.masks.push_back(ds_.frames[i].mask);
  }
  weights_ = make_weight_maps(stack, cfg.sampler);
  grads_ = FieldGrads<float>(state_.model);
}

LossTerms<float> Trainer::step() {
  const auto start = std::chrono::steady_clock::now();
  const Config& cfg = state_.config;
  const auto draws = weights_.draw_batch(state_.sampler_rng,
                                         static_cast<std::size_t>(cfg.train.batch_rays));
  batch_.clear();
  for (const auto& d : draws) {
    const std::size_t fi = train_frames_[d.frame];
    const Frame& f = ds_.frames[fi];
    batch_.rays.push_back(ray_for_pixel(state_.scene.camera(fi), d.row, d.col, f.tau));
    batch_.gt_rgb.push_back({f.image.at(d.row, d.col, 0), f.image.at(d.row, d.col, 1),
                             f.image.at(d.row, d.col, 2)});
    batch_.gt_depth.push_back(f.depth.empty() ? 0.0f : f.depth.at(d.row, d.col));
  }

  ObjectiveSettings os;
  os.render = cfg.render;
  os.weights = cfg.loss;
  os.threads = cfg.threads;
  const IndicatorGrid* grid = cfg.occupancy_enabled ? &state_.grid : nullptr;
  grads_.zero();
  const LossTerms<float> terms = evaluate_objective<float>(
      state_.model, batch_, state_.scene.aabb, grid, os, &grads_, workspace_);
  if (!std::isfinite(terms.total)) throw NumericalError("non-finite training loss");

  const auto groups = param_groups(state_.model, grads_, cfg.train.lr_planes, cfg.train.lr_mlp);
  const AdamConfig ac{cfg.train.beta1, cfg.train.beta2, cfg.train.eps};
  adam_step(state_.adam, groups,
            ac, cosine_lr_scale(state_.iteration, cfg.train.iterations,
                                cfg.train.lr_final_fraction));
  ++state_.iteration;

  const OccupancyConfig& oc = cfg.occupancy;
  if (cfg.occupancy_enabled && state_.iteration >= oc.warmup &&
      state_.iteration % oc.update_every == 0) {
    const FieldQuery<float> q = FieldQuery<float>::of(state_.model);
    state_.grid.update([&](const std::array<double, 4>& c) { return double(q.density(c)); },
                       state_.occupancy_rng, probe_count(oc, state_.grid));
  }
  history_.push_back(terms.total);
  wall_ms_ += elapsed_ms(start);
  return terms;
}

std::pair<double, double> Trainer::holdout_psnr() const {
  const Config& cfg = state_.config;
  const std::size_t want = std::max(1, cfg.train.log_eval_frames);
  std::vector<std::size_t> frames;
  const std::size_t n = eval_frames_.size();
  for (std::size_t k = 0; k < std::min(want, n); ++k) {
    frames.push_back(eval_frames_[k * n / std::min(want, n)]);
  }
  const MetricReport r = evaluate_frames(state_, ds_, frames,
                                         cfg.occupancy_enabled, cfg.threads);
  return {r.psnr, r.psnr_masked};
}

void Trainer::run(const std::function<void(const TrainLogRow&)>& on_log) {
  const Config& cfg = state_.config;
  while (state_.iteration < cfg.train.iterations) {
    const LossTerms<float> t = step();
    const bool last = state_.iteration == cfg.train.iterations;
    if (on_log && (state_.iteration % cfg.train.log_every == 0 || last)) {
      TrainLogRow row;
      row.iteration = state_.iteration;
      row.total = t.total;
      row.rgb = t.rgb;
      row.depth = t.depth;
      row.tv = t.tv;
      row.ts = t.ts;
      row.de = t.de;
      std::tie(row.psnr, row.psnr_masked) = holdout_psnr();
      row.wall_ms = wall_ms_;
      on_log(row);
    }
  }
}

RenderSettings eval_settings(const Config& cfg) {
  RenderSettings s = cfg.render;
  s.steps = cfg.eval_steps;
  return s;
}

FrameRender render_frame(const FieldQuery<float>& q, const Camera& cam,
                         double tau, const Aabb& aabb, const IndicatorGrid* grid,
                         const RenderSettings& settings, int threads) {
  const auto start = std::chrono::steady_clock::now();
  FrameRender fr;
  fr.rgb = Image(cam.width, cam.height, 3);
  fr.depth = Image(cam.width, cam.height, 1);
  fr.opacity = Image(cam.width, cam.height, 1);
  std::vector<std::uint64_t> counts(std::max(1, threads), 0);
  parallel_chunks(static_cast<std::size_t>(cam.height), threads,
                  [&](int worker, std::size_t b, std::size_t e) {
                    for (std::size_t r = b; r < e; ++r) {
                      for (int c = 0; c < cam.width; ++c) {
                        const Ray ray = ray_for_pixel(cam, static_cast<int>(r), c, tau);
                        const RenderOutput<float> out = render_ray_field<float>(
                            q, ray, aabb, grid, settings);
                        for (int ch = 0; ch < 3; ++ch) fr.rgb.at(r, c, ch) = out.rgb[ch];
                        fr.depth.at(r, c) = out.depth;
                        fr.opacity.at(r, c) = out.opacity;
                        counts[worker] += static_cast<std::uint64_t>(out.samples);
                      }
                    }
                  });
  for (auto c : counts) fr.samples += c;
  fr.ms = elapsed_ms(start);
  return fr;
}

MetricReport evaluate_frames(const TrainState& state, const Dataset& ds,
                             std::span<const std::size_t> frames, bool use_grid,
                             int threads, const std::vector<Image>* references) {
  const FieldQuery<float> q = FieldQuery<float>::of(state.model);
  const RenderSettings rs = eval_settings(state.config);
  std::vector<FrameMetrics> out;
  for (std::size_t i : frames) {
    const Frame& f = ds.frames.at(i);
    const FrameRender fr = render_frame(q, state.scene.camera(i), f.tau, state.scene.aabb,
                                        use_grid ? &state.grid : nullptr, rs, threads);
    const Image& ref = references ? references->at(i) : f.image;
    FrameMetrics m;
    m.frame = i;
    m.psnr = psnr(fr.rgb, ref);
    m.psnr_masked = psnr(fr.rgb, ref, &f.mask);
    m.ssim = std::min(ref.width, ref.height) >= 11 ? ssim(fr.rgb, ref) : 0.0;
    if (!f.depth.empty() &&
        std::any_of(f.depth.data.begin(), f.depth.data.end(), [](float d) { return d > 0; })) {
      m.depth_rmse = depth_rmse(fr.depth, f.depth);
    }
    out.push_back(m);
  }
  return summarize(std::move(out));
}

}  // namespace forplane
