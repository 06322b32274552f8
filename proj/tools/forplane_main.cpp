// SPDX-License-Identifier: Apache-2.0
//
// forplane: synthesize data, train, render, decompose, evaluate, and run
// diagnostics. Exit codes: 0 ok, 1 usage, 2 data, 3 numerical.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "forplane/checkpoint.hpp"
#include "forplane/gradcheck.hpp"
#include "forplane/pipeline.hpp"

namespace fs = std::filesystem;
using namespace forplane;
using nlohmann::json;

namespace {

struct Globals {
  std::string config_path;
  std::vector<std::string> overrides;
  long long seed = -1;
  int threads = 0;
};

int effective_threads(const Globals& g, const Config& cfg) {
  if (const char* env = std::getenv("FORPLANE_THREADS")) {
    try {
      const int t = std::stoi(env);
      if (t >= 1) return t;
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("FORPLANE_THREADS must be a positive integer, got '") + env + "'");
  }
  return g.threads > 0 ? g.threads : cfg.threads;
}

Config resolve_config(const Globals& g) {
  Config cfg = g.config_path.empty() ? Config{} : load_config(g.config_path);
  for (const auto& o : g.overrides) cfg.set(o);
  if (g.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(g.seed);
  cfg.threads = effective_threads(g, cfg);
  cfg.validate();
  return cfg;
}

void print_config(const std::string& command, const Config& cfg) {
  std::cout << "# " << command << " effective config\n" << cfg.to_json().dump(2) << "\n";
}

class Manifest {
 public:
  explicit Manifest(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw DataError("cannot create " + dir_.string());
  }
  void add(const fs::path& p) { files_.push_back(fs::relative(p, dir_).string()); }
  void write(const std::string& command, const Config& cfg) {
    json j;
    j["command"] = command;
    j["config"] = cfg.to_json();
    j["files"] = files_;
    std::ofstream out(dir_ / "manifest.json");
    out << j.dump(2) << "\n";
  }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

std::vector<std::size_t> parse_frames(const std::string& spec, std::size_t total) {
  std::vector<std::size_t> out;
  if (spec.empty() || spec == "all") {
    for (std::size_t i = 0; i < total; ++i) out.push_back(i);
    return out;
  }
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    long v = -1;
    try {
      v = std::stol(item, &used);
    } catch (const std::exception&) {
    }
    if (used != item.size() || v < 0 || static_cast<std::size_t>(v) >= total) {
      throw UsageError("bad frame index '" + item + "'");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic neural field reconstruction on factorized feature planes"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Flat JSON config file");
  app.fallthrough();
  app.add_option("--set", g.overrides, "Config override key=value (repeatable)")
      ->allow_extra_args(false);
  app.add_option("--seed", g.seed, "Training seed (overrides train.seed)");
  app.add_option("--threads", g.threads, "Worker threads (FORPLANE_THREADS overrides)");

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic moving-sphere dataset");
  SynthConfig sc;
  std::string synth_out;
  std::vector<double> mono;
  synth->add_option("--out", synth_out, "Output dataset directory")->required();
  synth->add_option("--width", sc.width);
  synth->add_option("--height", sc.height);
  synth->add_option("--frames", sc.frames);
  synth->add_option("--amplitude", sc.amplitude);
  synth->add_option("--sigma0", sc.sigma0);
  synth->add_option("--radius", sc.radius);
  synth->add_flag("--occluder", sc.occluder, "Add a moving tool occluder");
  synth->add_option("--mono", mono, "Store depth as a*d+b (monocular-style)")->expected(2);

  // train
  auto* train = app.add_subcommand("train", "Train a field on a dataset");
  std::string data_dir, out_dir;
  bool dump_weights = false;
  train->add_option("--data", data_dir)->required();
  train->add_option("--out", out_dir)->required();
  train->add_flag("--dump-weights", dump_weights, "Write sampling weight heatmaps");

  // render
  auto* render = app.add_subcommand("render", "Render frames from a checkpoint");
  std::string ckpt, frames_spec;
  bool dense = false;
  render->add_option("--checkpoint", ckpt)->required();
  render->add_option("--data", data_dir, "Dataset for reference images")->required();
  render->add_option("--out", out_dir)->required();
  render->add_option("--frames", frames_spec, "Comma-separated frame indices or 'all'");
  render->add_flag("--dense", dense, "Ignore the indicator grid");

  // decompose
  auto* decomp = app.add_subcommand("decompose", "Full / static-only / dynamic-only renders");
  std::size_t frame = 0;
  decomp->add_option("--checkpoint", ckpt)->required();
  decomp->add_option("--frame", frame);
  decomp->add_option("--out", out_dir)->required();

  // eval
  auto* eval = app.add_subcommand("eval", "PSNR, masked PSNR, SSIM, depth RMSE as CSV");
  std::string csv_path;
  eval->add_option("--checkpoint", ckpt)->required();
  eval->add_option("--data", data_dir)->required();
  eval->add_option("--frames", frames_spec);
  eval->add_option("--csv", csv_path, "Write the table here instead of stdout");
  eval->add_flag("--dense", dense);

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of all gradients");
  GradcheckOptions gopts;
  gc->add_option("--configs", gopts.configs);
  gc->add_option("--step", gopts.h, "Finite-difference step");
  gc->add_option("--tolerance", gopts.tolerance);

  // bench-march
  auto* bench = app.add_subcommand("bench-march", "Dense vs indicator-grid marching");
  bench->add_option("--checkpoint", ckpt)->required();
  bench->add_option("--data", data_dir)->required();
  bench->add_option("--frames", frames_spec);
  bench->add_option("--csv", csv_path);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Train across a grid of config values");
  std::string grid_spec;
  sweep->add_option("--data", data_dir)->required();
  sweep->add_option("--grid", grid_spec, "key=v1,v2;key2=v1,v2")->required();
  sweep->add_option("--out", out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const Config cfg = resolve_config(g);
    if (gopts.configs < 1) throw UsageError("--configs must be >= 1");
    if (g.seed >= 0) gopts.seed = static_cast<std::uint64_t>(g.seed);

    if (*synth) {
      print_config("synth", cfg);
      SyntheticScene scene = generate_synthetic(sc);
      if (mono.size() == 2) distort_depth(scene.dataset, mono[0], mono[1]);
      save_dataset(scene.dataset, synth_out);
      std::cout << "wrote " << scene.dataset.frames.size() << " frames to " << synth_out << "\n";
      return 0;
    }
    if (*train) {
      print_config("train", cfg);
      const Dataset ds = load_dataset(data_dir);
      Manifest manifest(out_dir);
      Trainer trainer(ds, cfg);
      if (dump_weights) {
        MaskStack stack;
        for (std::size_t i : trainer.train_frames()) {
          stack.images.push_back(ds.frames[i].image);
          stack.masks.push_back(ds.frames[i].mask);
        }
        const WeightMaps wm = make_weight_maps(stack, cfg.sampler);
        fs::create_directories(manifest.dir() / "weights");
        for (std::size_t k = 0; k < wm.maps().size(); ++k) {
          const fs::path p = manifest.dir() / "weights" / frame_name("weight", k);
          write_png8(p, weight_heatmap(wm.maps()[k]));
          manifest.add(p);
        }
      }
      const fs::path log_path = manifest.dir() / "metrics.csv";
      std::ofstream log(log_path);
      log << log_header() << "\n";
      std::cout << log_header() << "\n";
      const int every = cfg.train.checkpoint_every;
      trainer.run([&](const TrainLogRow& row) {
        log << log_line(row) << "\n" << std::flush;
        std::cout << log_line(row) << "\n" << std::flush;
        if (every > 0 && row.iteration % every == 0) {
          const fs::path p = manifest.dir() / ("checkpoint_" + std::to_string(row.iteration) + ".fpln");
          write_checkpoint(p, trainer.state());
          manifest.add(p);
        }
      });
      manifest.add(log_path);
      const fs::path final_path = manifest.dir() / "checkpoint.fpln";
      write_checkpoint(final_path, trainer.state());
      manifest.add(final_path);
      manifest.write("train", trainer.state().config);
      return 0;
    }
    if (*render) {
      TrainState st = read_checkpoint(ckpt);
      st.config.threads = cfg.threads;
      print_config("render", st.config);
      const Dataset ds = load_dataset(data_dir);
      const auto frames = parse_frames(frames_spec, st.scene.frames());
      const FieldQuery<float> q = FieldQuery<float>::of(st.model);
      std::vector<Image> colors, depths, refs;
      for (std::size_t f : frames) {
        const FrameRender fr = render_frame(q, st.scene.camera(f), st.scene.taus[f], st.scene.aabb,
                                            dense ? nullptr : &st.grid, eval_settings(st.config),
                                            cfg.threads);
        colors.push_back(fr.rgb);
        depths.push_back(fr.depth);
        refs.push_back(ds.frames.at(f).image);
      }
      Manifest manifest(out_dir);
      for (const auto& p : write_outputs(colors, depths, refs, st.scene.depth_scale, out_dir)) {
        manifest.add(p);
      }
      manifest.write("render", st.config);
      return 0;
    }
    if (*decomp) {
      TrainState st = read_checkpoint(ckpt);
      print_config("decompose", st.config);
      if (frame >= st.scene.frames()) throw UsageError("--frame out of range");
      const Decomposition d = decompose(st, frame, cfg.threads);
      Manifest manifest(out_dir);
      const std::pair<const char*, const Image*> outs[] = {
          {"full", &d.full.rgb}, {"static", &d.static_only.rgb}, {"dynamic", &d.dynamic_normalized}};
      for (const auto& [name, img] : outs) {
        const fs::path p = manifest.dir() / frame_name(name, frame);
        write_png8(p, *img);
        manifest.add(p);
      }
      manifest.write("decompose", st.config);
      std::cout << "static_vs_full_psnr," << psnr(d.static_only.rgb, d.full.rgb) << "\n";
      return 0;
    }
    if (*eval) {
      TrainState st = read_checkpoint(ckpt);
      print_config("eval", st.config);
      const Dataset ds = load_dataset(data_dir);
      const auto frames = parse_frames(frames_spec, st.scene.frames());
      const MetricReport r = evaluate_frames(st, ds, frames, !dense, cfg.threads);
      std::ostringstream table;
      table << "frame,psnr,psnr_masked,ssim,depth_rmse\n";
      for (const auto& f : r.frames) {
        table << f.frame << "," << f.psnr << "," << f.psnr_masked << "," << f.ssim << ","
              << f.depth_rmse << "\n";
      }
      table << "mean," << r.psnr << "," << r.psnr_masked << "," << r.ssim << "," << r.depth_rmse
            << "\n";
      if (csv_path.empty()) {
        std::cout << table.str();
      } else {
        std::ofstream(csv_path) << table.str();
      }
      return 0;
    }
    if (*gc) {
      print_config("gradcheck", cfg);
      const GradcheckReport r = run_gradcheck(gopts);
      std::cout << "config,description,parameters,max_rel_error,worst_parameter\n";
      for (const auto& c : r.configs) {
        std::cout << c.index << "," << c.description << "," << c.parameters << ","
                  << c.max_rel_error << "," << c.worst_parameter << "\n";
      }
      std::cout << (r.pass ? "PASS" : "FAIL") << " max_rel_error=" << r.max_rel_error
                << " seconds=" << r.seconds << "\n";
      return r.pass ? 0 : 3;
    }
    if (*bench) {
      TrainState st = read_checkpoint(ckpt);
      print_config("bench-march", st.config);
      const Dataset ds = load_dataset(data_dir);
      const auto frames = parse_frames(frames_spec, st.scene.frames());
      std::vector<Image> refs;
      for (const auto& f : ds.frames) refs.push_back(f.image);
      const auto rows = bench_march(st, frames, refs, cfg.threads);
      std::ostringstream table;
      table << "strategy,samples_per_ray,ms_per_frame,psnr\n";
      for (const auto& r : rows) {
        table << r.strategy << "," << r.samples_per_ray << "," << r.ms_per_frame << "," << r.psnr
              << "\n";
      }
      if (csv_path.empty()) {
        std::cout << table.str();
      } else {
        std::ofstream(csv_path) << table.str();
      }
      return 0;
    }
    if (*sweep) {
      print_config("sweep", cfg);
      const auto axes = parse_sweep_grid(grid_spec);
      const Dataset ds = load_dataset(data_dir);
      const auto rows = run_sweep(ds, cfg, axes);
      Manifest manifest(out_dir);
      const fs::path p = manifest.dir() / "sweep.csv";
      std::ofstream out(p);
      for (const auto& a : axes) out << a.key << ",";
      out << "psnr,psnr_masked,final_loss\n";
      for (const auto& r : rows) {
        for (double v : r.values) out << format_double(v) << ",";
        out << r.psnr << "," << r.psnr_masked << "," << r.final_loss << "\n";
      }
      out.close();
      manifest.add(p);
      manifest.write("sweep", cfg);
      std::ifstream back(p);
      std::cout << back.rdbuf();
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
