// SPDX-License-Identifier: Apache-2.0
#include "forplane/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace forplane {

Image normalize_range(const Image& img) {
  if (img.empty()) return img;
  const auto [lo, hi] = std::minmax_element(img.data.begin(), img.data.end());
  const float a = *lo, b = *hi;
  if (!(b - a > 1e-12f)) return img;
  Image out = img;
  for (float& v : out.data) v = (v - a) / (b - a);
  return out;
}

Decomposition decompose(const TrainState& state, std::size_t frame, int threads) {
  const RenderSettings rs = eval_settings(state.config);
  const Camera cam = state.scene.camera(frame);
  const double tau = state.scene.taus.at(frame);
  const auto& planes = state.model.planes;
  auto render = [&](const PlaneView<float>& view) {
    return render_frame(FieldQuery<float>::of(state.model, view), cam, tau, state.scene.aabb,
                        nullptr, rs, threads);
  };
  Decomposition d;
  d.full = render(full_view(planes));
  d.static_only = render(force_field_to_identity(planes, FieldPart::Dynamic));
  d.dynamic_only = render(force_field_to_identity(planes, FieldPart::Static));
  d.dynamic_normalized = normalize_range(d.dynamic_only.rgb);
  return d;
}

std::vector<MarchBenchRow> bench_march(const TrainState& state,
                                       const std::vector<std::size_t>& frames,
                                       const std::vector<Image>& references,
                                       int threads) {
  const RenderSettings rs = eval_settings(state.config);
  const FieldQuery<float> q = FieldQuery<float>::of(state.model);
  std::vector<MarchBenchRow> rows;
  for (const bool use_grid : {false, true}) {
    MarchBenchRow row;
    row.strategy = use_grid ? "grid" : "dense";
    std::uint64_t samples = 0;
    double ms = 0.0, psnr_sum = 0.0;
    for (std::size_t f : frames) {
      const FrameRender fr = render_frame(q, state.scene.camera(f), state.scene.taus.at(f),
                                          state.scene.aabb, use_grid ? &state.grid : nullptr,
                                          rs, threads);
      samples += fr.samples;
      ms += fr.ms;
      psnr_sum += psnr(fr.rgb, references.at(f));
    }
    const double n = static_cast<double>(std::max<std::size_t>(frames.size(), 1));
    row.samples_per_ray =
        static_cast<double>(samples) / (n * state.scene.width * state.scene.height);
    row.ms_per_frame = ms / n;
    row.psnr = psnr_sum / n;
    rows.push_back(row);
  }
  return rows;
}

std::vector<SweepAxis> parse_sweep_grid(const std::string& spec) {
  std::vector<SweepAxis> axes;
  const Config probe;
  const auto keys = probe.to_json();
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ';')) {
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == part.size()) {
      throw UsageError("sweep axis must look like key=v1,v2,...: '" + part + "'");
    }
    SweepAxis axis;
    axis.key = part.substr(0, eq);
    if (!keys.contains(axis.key)) throw UsageError("unknown sweep key '" + axis.key + "'");
    std::stringstream vs(part.substr(eq + 1));
    std::string v;
    while (std::getline(vs, v, ',')) {
      try {
        std::size_t used = 0;
        axis.values.push_back(std::stod(v, &used));
        if (used != v.size()) throw std::invalid_argument(v);
      } catch (const std::exception&) {
        throw UsageError("sweep value '" + v + "' for " + axis.key + " is not a number");
      }
    }
    if (axis.values.empty()) throw UsageError("sweep axis " + axis.key + " has no values");
    axes.push_back(std::move(axis));
  }
  if (axes.empty()) throw UsageError("empty sweep grid");
  return axes;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::vector<SweepRow> run_sweep(const Dataset& ds, const Config& base,
                                const std::vector<SweepAxis>& axes) {
  std::size_t total = 1;
  for (const auto& a : axes) total *= a.values.size();
  std::vector<SweepRow> rows;
  for (std::size_t idx = 0; idx < total; ++idx) {
    Config cfg = base;
    SweepRow row;
    std::size_t rest = idx;
    std::vector<std::size_t> pick(axes.size());
    for (std::size_t a = axes.size(); a-- > 0;) {
      pick[a] = rest % axes[a].values.size();
      rest /= axes[a].values.size();
    }
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const double v = axes[a].values[pick[a]];
      row.values.push_back(v);
      cfg.set(axes[a].key + "=" + format_double(v));
    }
    Trainer trainer(ds, cfg);
    trainer.run();
    const auto& hist = trainer.loss_history();
    row.final_loss = hist.empty() ? 0.0 : hist.back();
    const MetricReport r = evaluate_frames(trainer.state(), ds, trainer.eval_frames(),
                                           cfg.occupancy_enabled, cfg.threads);
    row.psnr = r.psnr;
    row.psnr_masked = r.psnr_masked;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace forplane
