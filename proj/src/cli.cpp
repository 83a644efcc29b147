#include "dosmct/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"

#include "dosmct/config.hpp"
#include "dosmct/hash.hpp"
#include "dosmct/io.hpp"
#include "dosmct/metrics.hpp"
#include "dosmct/rng.hpp"

#ifndef DOSMCT_VERSION
#define DOSMCT_VERSION "unknown"
#endif

namespace dosmct {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string absolute_path(const std::string& p) {
  if (p.empty()) return p;
  return fs::absolute(p).lexically_normal().string();
}

// Input paths are stored absolute so a manifest reruns from any directory.
void absolutize_inputs(RunConfig& cfg) {
  cfg.sinogram_input = absolute_path(cfg.sinogram_input);
  cfg.truth_input = absolute_path(cfg.truth_input);
  if (cfg.checkpoint != "zero") cfg.checkpoint = absolute_path(cfg.checkpoint);
  for (auto& p : cfg.train.images) p = absolute_path(p);
}

class Run {
 public:
  Run(std::string command, RunConfig cfg, fs::path out)
      : command_(std::move(command)), cfg_(std::move(cfg)), out_(std::move(out)), start_(Clock::now()) {
    fs::create_directories(out_);
  }

  const RunConfig& cfg() const { return cfg_; }
  const fs::path& out() const { return out_; }

  void image(const std::string& name, const Image& img, const json& extra = json::object()) {
    write_image(out_ / name, img, extra);
    outputs_[name] = {{"path", raw_path(name).string()}, {"data_hash", read_sidecar(out_ / name).at("data_hash")}};
  }
  void sinogram(const std::string& name, const Sinogram& s) {
    write_sinogram(out_ / name, s);
    outputs_[name] = {{"path", raw_path(name).string()}, {"data_hash", read_sidecar(out_ / name).at("data_hash")}};
  }
  void text(const std::string& name, const std::string& body) {
    write_text(out_ / name, body);
    file(name);
  }
  void file(const std::string& name) {
    outputs_[name] = {{"path", name}, {"data_hash", hex64(fnv1a64(read_text(out_ / name)))}};
  }
  void preview(const std::string& name, const Image& img, double lo, double hi) {
    write_pgm(out_ / name, img.values, img.grid.nx, img.grid.ny, lo, hi);
    file(name);
  }
  void timing(const std::string& what, double s) { timings_[what] = s; }
  void note(const std::string& key, json value) { notes_[key] = std::move(value); }

  void finish() {
    timings_["total_s"] = seconds_since(start_);
    const json manifest{{"command", command_},
                        {"config", to_json(cfg_)},
                        {"config_hash", config_hash(cfg_)},
                        {"seed", cfg_.seed},
                        {"code_version", DOSMCT_VERSION},
                        {"rng", std::string(Rng::kName)},
                        {"inputs", inputs()},
                        {"outputs", outputs_},
                        {"notes", notes_},
                        {"timings", timings_}};
    write_text(out_ / "manifest.json", manifest.dump(2) + "\n");
  }

 private:
  json inputs() const {
    json in = json::object();
    if (!cfg_.sinogram_input.empty()) in["sinogram"] = cfg_.sinogram_input;
    if (!cfg_.truth_input.empty()) in["truth"] = cfg_.truth_input;
    if (!cfg_.checkpoint.empty()) in["checkpoint"] = cfg_.checkpoint;
    if (!cfg_.train.images.empty()) in["train_images"] = cfg_.train.images;
    return in;
  }

  std::string command_;
  RunConfig cfg_;
  fs::path out_;
  Clock::time_point start_;
  json outputs_ = json::object();
  json timings_ = json::object();
  json notes_ = json::object();
};

struct Problem {
  Sinogram y;
  std::optional<Image> truth;
};

Problem load_problem(const RunConfig& cfg) {
  Problem p;
  if (!cfg.sinogram_input.empty()) {
    p.y = read_sinogram(cfg.sinogram_input);
  } else {
    const Image phantom = make_phantom(cfg.phantom);
    p.y = subsample_views(simulate_measurement(phantom, full_geometry(cfg), cfg.noise),
                          static_cast<std::size_t>(cfg.views));
    p.truth = phantom;
  }
  if (!cfg.truth_input.empty()) p.truth = read_image(cfg.truth_input);
  if (p.truth && !(p.truth->grid == cfg.grid))
    throw std::runtime_error("ground truth grid differs from the configured grid");
  return p;
}

std::unique_ptr<ScoreFunction> make_score(const RunConfig& cfg) {
  if (cfg.checkpoint == "zero") return std::make_unique<ZeroScore>(cfg.dosm.schedule);
  if (cfg.checkpoint.empty())
    throw ConfigError("dosm.checkpoint is required (a trained model path, or \"zero\")");
  auto model = std::make_shared<DenoiserModel>(load_checkpoint(cfg.checkpoint));
  return std::make_unique<DenoiserScore>(model, cfg.dosm.schedule);
}

double range_for(const RunConfig& cfg, const Image& truth) {
  return cfg.data_range > 0.0 ? cfg.data_range : value_range(truth);
}

std::string metrics_row(const std::string& method, std::size_t views, const std::optional<MetricReport>& m) {
  std::string row = method + "," + std::to_string(views) + ",";
  if (m) row += fmt(m->psnr) + "," + fmt(m->ssim);
  else row += ",";
  return row + "\n";
}

int cmd_simulate(Run& run) {
  const RunConfig& cfg = run.cfg();
  const auto t = Clock::now();
  const Image phantom = make_phantom(cfg.phantom);
  const Sinogram full = simulate_measurement(phantom, full_geometry(cfg), cfg.noise);
  const Sinogram sparse = subsample_views(full, static_cast<std::size_t>(cfg.views));
  run.timing("simulate_s", seconds_since(t));

  const double lo = *std::min_element(phantom.values.begin(), phantom.values.end());
  const double hi = *std::max_element(phantom.values.begin(), phantom.values.end());
  run.image("phantom", phantom, {{"preview_window", {lo, hi}}});
  run.preview("phantom.pgm", phantom, lo, hi);
  run.sinogram("sinogram_full", full);
  run.sinogram("sinogram", sparse);
  Image sino_view({sparse.geometry.n_detectors, static_cast<int>(sparse.geometry.n_views()), 1.0},
                  sparse.values);
  const double slo = *std::min_element(sparse.values.begin(), sparse.values.end());
  const double shi = *std::max_element(sparse.values.begin(), sparse.values.end());
  run.preview("sinogram.pgm", sino_view, slo, shi);
  std::cerr << "simulate: " << sparse.geometry.n_views() << " of " << full.geometry.n_views()
            << " views, " << sparse.geometry.n_detectors << " detectors\n";
  return kExitOk;
}

struct MethodResult {
  Image image;
  std::optional<ReconTrace> trace;
};

MethodResult run_method(Run& run, const std::string& method, const RunConfig& cfg, const Problem& p) {
  const auto t = Clock::now();
  MethodResult r;
  if (method == "fbp") {
    r.image = fbp(p.y, cfg.grid);
  } else if (method == "sirt") {
    const int iters = cfg.sirt.iters > 0 ? cfg.sirt.iters
                                         : cfg.dosm.schedule.n_steps * cfg.dosm.dc_inner_iters;
    run.note("sirt_iters", iters);
    r.image = sirt(p.y, cfg.grid, iters);
  } else if (method == "fista") {
    FistaConfig fc = cfg.fista.fista;
    if (!cfg.fista.lambda_grid.empty() && p.truth) {
      std::vector<double> psnrs;
      const std::size_t best = fista_lambda_search(p.y, *p.truth, fc, cfg.fista.lambda_grid,
                                                   range_for(cfg, *p.truth), &psnrs);
      fc.lambda = cfg.fista.lambda_grid[best];
      run.note("fista_lambda_grid", cfg.fista.lambda_grid);
      run.note("fista_lambda_psnr", psnrs);
    }
    run.note("fista_lambda", fc.lambda);
    r.image = fista_tv(p.y, cfg.grid, fc).image;
  } else if (method == "dosm") {
    const auto score = make_score(cfg);
    const Image* truth = p.truth ? &*p.truth : nullptr;
    ReconResult res = reconstruct(p.y, cfg.grid, *score, cfg.dosm, truth);
    r.image = std::move(res.image);
    r.trace = std::move(res.trace);
  } else {
    throw ConfigError("unknown method \"" + method + "\"");
  }
  run.timing(method + "_s", seconds_since(t));
  return r;
}

int cmd_reconstruct(Run& run) {
  const RunConfig& cfg = run.cfg();
  const Problem p = load_problem(cfg);
  const MethodResult r = run_method(run, cfg.method, cfg, p);

  run.image("recon", r.image);
  std::optional<MetricReport> m;
  double lo = *std::min_element(r.image.values.begin(), r.image.values.end());
  double hi = *std::max_element(r.image.values.begin(), r.image.values.end());
  if (p.truth) {
    m = evaluate(r.image, *p.truth, range_for(cfg, *p.truth));
    Image diff = r.image;
    for (std::size_t j = 0; j < diff.values.size(); ++j) diff.values[j] -= p.truth->values[j];
    run.image("diff", diff);
    lo = *std::min_element(p.truth->values.begin(), p.truth->values.end());
    hi = *std::max_element(p.truth->values.begin(), p.truth->values.end());
    run.note("data_range", m->data_range);
  }
  run.preview("recon.pgm", r.image, lo, hi);
  run.text("metrics.csv", "method,views,psnr,ssim\n" + metrics_row(cfg.method, p.y.geometry.n_views(), m));
  if (r.trace) run.text("trace.csv", r.trace->csv());
  std::cerr << "reconstruct: " << cfg.method << " on " << p.y.geometry.n_views() << " views";
  if (m) std::cerr << ", PSNR " << m->psnr << " dB, SSIM " << m->ssim;
  std::cerr << "\n";
  return kExitOk;
}

int cmd_train(Run& run) {
  const RunConfig& cfg = run.cfg();
  const std::vector<Image> data = training_images(cfg);
  DenoiserModel model(cfg.train.arch);
  model.initialize(cfg.train.init_seed);
  const TrainReport rep = dsm_train(model, data, cfg.dosm.schedule, cfg.train.train, [](int e, double l) {
    std::cerr << "train: epoch " << e << " loss " << l << "\n";
  });
  run.timing("train_s", rep.seconds);
  save_checkpoint(run.out() / "model.ckpt", model,
                  {{"schedule", to_json(cfg)["dosm"]["schedule"]}, {"config_hash", config_hash(cfg)}});
  run.file("model.ckpt");
  std::string csv = "epoch,loss\n";
  for (std::size_t e = 0; e < rep.epoch_loss.size(); ++e)
    csv += std::to_string(e) + "," + fmt(rep.epoch_loss[e]) + "\n";
  run.text("loss.csv", csv);
  run.note("parameters", model.parameter_count());
  run.note("training_images", data.size());
  return kExitOk;
}

int cmd_sample(Run& run) {
  const RunConfig& cfg = run.cfg();
  const auto score = make_score(cfg);
  const auto t = Clock::now();
  const Image s = pc_sample(cfg.grid, *score, cfg.dosm.seed, cfg.dosm.corrector_snr, cfg.dosm.n_corrector_steps);
  run.timing("sample_s", seconds_since(t));
  run.image("sample", s);
  return kExitOk;
}

int cmd_ablate(Run& run) {
  const RunConfig& cfg = run.cfg();
  std::vector<double> values = cfg.ablate.values;
  if (values.empty()) throw ConfigError("ablate: the value list is empty");
  std::sort(values.begin(), values.end());
  const Problem p = load_problem(cfg);
  std::string csv = "axis,value,psnr,ssim,seconds\n";
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double v = values[k];
    RunConfig c = cfg;
    if (cfg.ablate.axis == "beta") {
      c.dosm.beta = v;
    } else {
      if (v != std::floor(v)) throw ConfigError("ablate: " + cfg.ablate.axis + " values must be integers");
      (cfg.ablate.axis == "N" ? c.dosm.n_channels : c.dosm.dc_inner_iters) = static_cast<int>(v);
    }
    try {
      c.dosm.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("ablate: ") + e.what());
    }
    const auto t = Clock::now();
    const MethodResult r = run_method(run, "dosm", c, p);
    const double secs = seconds_since(t);
    run.image("recon_" + std::to_string(k), r.image, {{"ablate", {{"axis", cfg.ablate.axis}, {"value", v}}}});
    csv += cfg.ablate.axis + "," + fmt(v) + ",";
    if (p.truth) {
      const MetricReport m = evaluate(r.image, *p.truth, range_for(cfg, *p.truth));
      csv += fmt(m.psnr) + "," + fmt(m.ssim);
      std::cerr << "ablate: " << cfg.ablate.axis << "=" << v << " PSNR " << m.psnr << " dB\n";
    } else {
      csv += ",";
    }
    csv += "," + fmt(secs) + "\n";
  }
  run.text("ablation.csv", csv);
  return kExitOk;
}

int dispatch(const std::string& command, const RunConfig& cfg, const fs::path& out) {
  Run run(command, cfg, out);
  int rc = kExitOk;
  if (command == "simulate") rc = cmd_simulate(run);
  else if (command == "reconstruct") rc = cmd_reconstruct(run);
  else if (command == "train-score") rc = cmd_train(run);
  else if (command == "sample") rc = cmd_sample(run);
  else if (command == "ablate") rc = cmd_ablate(run);
  else throw ConfigError("unknown command \"" + command + "\"");
  run.finish();
  return rc;
}

struct CommonFlags {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> views;
  std::optional<std::string> method;
  std::optional<std::string> axis;
  std::vector<double> values;
  std::optional<std::string> checkpoint;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config, "Run configuration (JSON)");
  sub->add_option("--out", f.out, "Output directory")->capture_default_str();
  sub->add_option("--seed", f.seed, "Master seed");
  sub->add_option("--views", f.views, "Number of kept views");
  sub->add_option("--checkpoint", f.checkpoint, "Score model for dosm (a checkpoint path or \"zero\")");
}

RunConfig resolve(const CommonFlags& f) {
  FlagOverrides flags{f.seed, f.views, f.method, f.axis, std::nullopt, f.checkpoint};
  if (!f.values.empty()) flags.values = f.values;
  json j = json::object();
  if (!f.config.empty()) {
    if (!fs::exists(f.config)) throw ConfigError("config file not found: " + f.config);
    try {
      j = read_json(f.config);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    const std::pair<const char*, bool> shadowed[] = {{"seed", f.seed.has_value()},
                                                     {"views", f.views.has_value()},
                                                     {"method", f.method.has_value()}};
    for (const auto& [key, given] : shadowed)
      if (given && j.is_object() && j.contains(key))
        std::cerr << "note: --" << key << " ignored, the config file sets it\n";
    if (f.checkpoint && j.is_object() && j.contains("dosm") && j["dosm"].is_object() &&
        j["dosm"].contains("checkpoint"))
      std::cerr << "note: --checkpoint ignored, the config file sets it\n";
  }
  RunConfig cfg = config_from_json(j, flags);
  absolutize_inputs(cfg);
  return cfg;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Sparse-view CT reconstruction with diffusion-model priors (DOSM)"};
  app.require_subcommand(1);
  app.set_version_flag("--version", DOSMCT_VERSION);

  CommonFlags f;
  auto* simulate = app.add_subcommand("simulate", "Phantom, full and sparse sinograms, previews");
  auto* recon = app.add_subcommand("reconstruct", "Reconstruct with fbp|sirt|fista|dosm");
  auto* train = app.add_subcommand("train-score", "Train the denoising score model");
  auto* sample = app.add_subcommand("sample", "Unconditional predictor-corrector sample");
  auto* ablate = app.add_subcommand("ablate", "DOSM sweep over N, K or beta");
  auto* rerun = app.add_subcommand("rerun", "Repeat a run from its manifest");
  for (auto* sub : {simulate, recon, train, sample, ablate}) add_common(sub, f);
  recon->add_option("--method", f.method, "fbp|sirt|fista|dosm")
      ->check(CLI::IsMember({"fbp", "sirt", "fista", "dosm"}));
  ablate->add_option("--axis", f.axis, "N|K|beta")->check(CLI::IsMember({"N", "K", "beta"}));
  ablate->add_option("--values", f.values, "Comma-separated values")->delimiter(',');
  std::string manifest_path;
  rerun->add_option("manifest", manifest_path, "manifest.json of an earlier run")->required();
  rerun->add_option("--out", f.out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (rerun->parsed()) {
      if (!fs::exists(manifest_path)) throw ConfigError("manifest not found: " + manifest_path);
      json m;
      try {
        m = read_json(manifest_path);
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
      if (!m.contains("command") || !m.contains("config"))
        throw ConfigError(manifest_path + ": not a run manifest");
      return dispatch(m["command"].get<std::string>(), config_from_json(m["config"]), f.out);
    }
    const RunConfig cfg = resolve(f);
    for (auto* sub : app.get_subcommands()) return dispatch(sub->get_name(), cfg, f.out);
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace dosmct
