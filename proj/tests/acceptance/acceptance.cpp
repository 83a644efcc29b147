// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.
//   acceptance [--only 1,2,...] [--cache DIR] [--checkpoint FILE]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <memory>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dense_oracle.hpp"
#include "dosmct/classical.hpp"
#include "dosmct/cli.hpp"
#include "dosmct/config.hpp"
#include "dosmct/denoiser.hpp"
#include "dosmct/dosm.hpp"
#include "dosmct/io.hpp"
#include "dosmct/metrics.hpp"
#include "dosmct/phantoms.hpp"
#include "dosmct/projector.hpp"
#include "dosmct/rng.hpp"
#include "gaussian_probe.hpp"

using namespace dosmct;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

FanBeamGeometry fan(std::size_t views, int dets = 720) {
  FanBeamGeometry g;
  g.n_detectors = dets;
  g.view_angles = equispaced_angles(views, 2.0 * std::numbers::pi);
  return g;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dosmct");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Verdict adjoint_identity() {
  const ImageGrid grid{64, 64, 3.2};
  FanBeamGeometry g = fan(1);
  Rng rng(1);
  g.view_angles.clear();
  for (int v = 0; v < 23; ++v) g.view_angles.push_back(2.0 * std::numbers::pi * rng.uniform());
  const RayProjector proj(grid, g);
  std::vector<double> x(grid.size()), y(g.n_rays()), ax(g.n_rays()), aty(grid.size());
  double worst = 0.0;
  for (int pair = 0; pair < 100; ++pair) {
    rng.fill_normal(x);
    rng.fill_normal(y);
    proj.forward(x, ax);
    proj.back(y, aty);
    const double lhs = dot(ax, y), rhs = dot(x, aty);
    worst = std::max(worst, std::abs(lhs - rhs) / std::abs(lhs));
  }

  const ImageGrid small{16, 16, 9.0};
  const FanBeamGeometry gs = fan(60);
  const Eigen::MatrixXd a = oracle::system_matrix(small, gs);
  const RayProjector ps(small, gs);
  std::vector<double> xs(small.size()), ys(gs.n_rays()), axs(gs.n_rays()), atys(small.size());
  rng.fill_normal(xs);
  rng.fill_normal(ys);
  ps.forward(xs, axs);
  ps.back(ys, atys);
  const double fwd = oracle::rel_error(oracle::to_vector(axs), a * oracle::to_vector(xs));
  const double bwd = oracle::rel_error(oracle::to_vector(atys), a.transpose() * oracle::to_vector(ys));
  return {worst < 1e-12 && fwd < 1e-10 && bwd < 1e-10,
          "adjoint " + fmt(worst) + ", dense " + fmt(std::max(fwd, bwd))};
}

Verdict sirt_oracle() {
  const ImageGrid grid{8, 8, 4.0};
  const FanBeamGeometry g = fan(180);
  Rng rng(2);
  Image truth(grid);
  for (double& v : truth.values) v = rng.uniform();
  const Sinogram y = forward_project(truth, g);
  std::vector<double> hist;
  const Image x = sirt(y, grid, 500, &hist);
  bool monotone = true;
  for (std::size_t k = 1; k < hist.size(); ++k) monotone = monotone && hist[k] <= hist[k - 1] * (1.0 + 1e-12);
  const Eigen::MatrixXd a = oracle::system_matrix(grid, g);
  const Eigen::VectorXd ls = (a.transpose() * a).ldlt().solve(a.transpose() * oracle::to_vector(y.values));
  const double err = oracle::rel_error(oracle::to_vector(x.values), ls);
  return {monotone && err < 1e-3, "relative error " + fmt(err) + (monotone ? ", monotone" : ", not monotone")};
}

Verdict mixture_score() {
  const ImageGrid grid{2, 2, 1.0};
  const GaussianMixturePrior prior{{{{0.0, 1.0, -1.0, 0.5}, 0.3, 0.5}, {{2.0}, 0.8, 0.3}, {{-1.5}, 0.2, 0.2}}};
  Rng rng(3);
  double worst = 0.0;
  for (int probe = 0; probe < 100; ++probe) {
    Image x(grid);
    for (double& v : x.values) v = 3.0 * rng.normal();
    const double sigma = 0.1 + 2.0 * rng.uniform();
    const Image s = analytic_score(prior, x, sigma);
    const double h = 1e-4;
    for (std::size_t j = 0; j < x.values.size(); ++j) {
      Image xp = x, xm = x;
      xp.values[j] += h;
      xm.values[j] -= h;
      const double fd = (prior.log_density(xp.values, sigma) - prior.log_density(xm.values, sigma)) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - s.values[j]));
    }
  }
  return {worst < 1e-6, "max abs error " + fmt(worst)};
}

Verdict pc_normal() {
  // The degenerate configuration (N=1, K=0, beta=0) on a batch of 10^4
  // two-dimensional samples.
  const NoiseSchedule sch{0.01, 378.0, 200};
  const AnalyticScore score({{{{0.0}, 1.0, 1.0}}}, sch);
  const int samples = 10000;
  const ImageGrid grid{2, samples, 0.01};
  DosmConfig cfg;
  cfg.n_channels = 1;
  cfg.dc_inner_iters = 0;
  cfg.beta = 0.0;
  cfg.schedule = sch;
  cfg.seed = 7;
  FanBeamGeometry g = fan(1, 1);
  const Image x = reconstruct(Sinogram(g), grid, score, cfg).image;
  bool ok = true;
  std::string detail;
  for (int d = 0; d < 2; ++d) {
    double m = 0.0, s2 = 0.0;
    for (int k = 0; k < samples; ++k) {
      m += x.at(d, k);
      s2 += x.at(d, k) * x.at(d, k);
    }
    const double mean = m / samples, var = s2 / samples - mean * mean;
    ok = ok && std::abs(mean) < 0.05 && std::abs(var - 1.0) < 0.1;
    detail += (d ? "; " : "") + std::string("mean ") + fmt(mean, 3) + " var " + fmt(var, 4);
  }
  return {ok, detail};
}

Verdict estimator_checks() {
  const ImageGrid grid{4, 4, 1.0};
  Rng rng(4);
  Image x0(grid);
  for (double& v : x0.values) v = rng.uniform();
  const double sigma = 0.5;
  const int trials = 1000;
  bool ok = true;
  std::string detail;
  for (std::size_t n : {2u, 5u, 10u}) {
    std::vector<double> m(grid.size(), 0.0), s(grid.size(), 0.0), m1(grid.size(), 0.0), s1(grid.size(), 0.0);
    for (int t = 0; t < trials; ++t) {
      ChannelEnsemble ens = ChannelEnsemble::uniform(grid, n);
      for (auto& x : ens.x) {
        x = x0;
        for (double& v : x.values) v += sigma * rng.normal();
      }
      const Image e = estimate_x0(ens);
      for (std::size_t j = 0; j < grid.size(); ++j) {
        m[j] += e.values[j];
        s[j] += e.values[j] * e.values[j];
        m1[j] += ens.x[0].values[j];
        s1[j] += ens.x[0].values[j] * ens.x[0].values[j];
      }
    }
    // Bias is judged on the pixel-averaged error, whose standard error is
    // sqrt(sum of pixel variances / trials) / pixels.
    double var = 0.0, var1 = 0.0, bias = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const double mean = m[j] / trials;
      var += s[j] / trials - mean * mean;
      var1 += s1[j] / trials - (m1[j] / trials) * (m1[j] / trials);
      bias += mean - x0.values[j];
    }
    const double px = static_cast<double>(grid.size());
    const double z = std::abs(bias / px) / (std::sqrt(var / trials) / px);
    const double ratio = var / var1 * static_cast<double>(n);
    ok = ok && z < 3.0 && std::abs(ratio - 1.0) < 0.2;
    detail += (n == 2 ? "" : "; ") + std::string("N=") + std::to_string(n) + " N*ratio " + fmt(ratio, 3) +
              " bias " + fmt(z, 2) + " SE";
  }
  return {ok, detail};
}

Verdict toy_denoiser() {
  const probe::GaussianToy toy;
  const probe::ProbeResult r = probe::probe_model(probe::train_toy(toy, 256, 100, 1e-3), toy);
  return {r.cosine > 0.95, "cosine " + fmt(r.cosine)};
}

struct Desk {
  RunConfig cfg;
  Image truth;
  double range = 0.0;
  std::shared_ptr<const DenoiserModel> model;

  Sinogram measurement(int views) const {
    return subsample_views(simulate_measurement(truth, full_geometry(cfg), cfg.noise), views);
  }
  ReconResult dosm(const Sinogram& y, DosmConfig d) const {
    const DenoiserScore score(model, d.schedule);
    return reconstruct(y, cfg.grid, score, d, &truth);
  }
};

Verdict ordering(const Desk& desk) {
  bool ok = true;
  std::string detail;
  for (int views : {23, 10}) {
    const Sinogram y = desk.measurement(views);
    const double p_fbp = psnr(fbp(y, desk.cfg.grid), desk.truth, desk.range);
    FistaConfig fc = desk.cfg.fista.fista;
    std::vector<double> grid_psnr;
    fista_lambda_search(y, desk.truth, fc, desk.cfg.fista.lambda_grid, desk.range, &grid_psnr);
    const double p_fista = *std::max_element(grid_psnr.begin(), grid_psnr.end());
    const double p_dosm = psnr(desk.dosm(y, desk.cfg.dosm).image, desk.truth, desk.range);
    const bool strict = p_dosm > p_fista && p_fista > p_fbp;
    ok = ok && strict && (views != 23 || p_dosm >= p_fbp + 5.0);
    detail += (views == 23 ? "" : "; ") + std::to_string(views) + " views: DOSM " + fmt(p_dosm) + " FISTA " +
              fmt(p_fista) + " FBP " + fmt(p_fbp) + " dB";
    std::cout << "  criterion 7, " << views << " views: DOSM " << p_dosm << " FISTA " << p_fista << " FBP "
              << p_fbp << std::endl;
  }
  return {ok, detail};
}

Verdict ablation(const Desk& desk) {
  const Sinogram y = desk.measurement(23);
  const std::vector<std::uint64_t> seeds = {1, 2, 3};
  auto medians = [&](auto set, const std::vector<int>& values) {
    std::vector<double> out;
    for (int v : values) {
      std::vector<double> runs;
      for (std::uint64_t s : seeds) {
        DosmConfig d = desk.cfg.dosm;
        d.seed = s;
        set(d, v);
        runs.push_back(psnr(desk.dosm(y, d).image, desk.truth, desk.range));
      }
      out.push_back(median(runs));
      std::cout << "  criterion 8, value " << v << ": median PSNR " << out.back() << std::endl;
    }
    return out;
  };
  const auto by_n = medians([](DosmConfig& d, int v) { d.n_channels = v; }, {1, 3, 5});
  const auto by_k = medians([](DosmConfig& d, int v) { d.dc_inner_iters = v; }, {0, 5, 20});
  auto non_decreasing = [](const std::vector<double>& v) {
    return std::is_sorted(v.begin(), v.end());
  };
  auto list = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "/" : "") + fmt(v[k]);
    return s;
  };
  return {non_decreasing(by_n) && non_decreasing(by_k),
          "N 1/3/5: " + list(by_n) + " dB; K 0/5/20: " + list(by_k) + " dB"};
}

Verdict determinism(const fs::path& work, const fs::path& checkpoint) {
  fs::remove_all(work);
  fs::create_directories(work);
  json j = {{"seed", 11},
            {"full_views", 180},
            {"views", 10},
            {"grid", {{"nx", 32}, {"ny", 32}, {"pixel_size", 6.4}}},
            {"noise", {{"sigma", 0.1}, {"seed", 12}}},
            {"fista", {{"iters", 20}, {"lambda_grid", {0.1, 1.0}}}},
            {"dosm", {{"schedule", {{"sigma_min", 0.01}, {"sigma_max", 50.0}, {"n_steps", 10}}},
                      {"dc_inner_iters", 2},
                      {"n_channels", 2},
                      {"checkpoint", checkpoint.string()}}},
            {"train", {{"hidden_channels", 4}, {"dilations", {1, 2, 1}}, {"epochs", 2}, {"n_images", 4}}},
            {"ablate", {{"axis", "K"}, {"values", {0, 2}}}}};
  const fs::path cfg = work / "config.json";
  write_text(cfg, j.dump(2));
  std::vector<std::vector<std::string>> commands = {{"simulate"},
                                                    {"reconstruct", "--method", "fbp"},
                                                    {"reconstruct", "--method", "sirt"},
                                                    {"reconstruct", "--method", "fista"},
                                                    {"reconstruct", "--method", "dosm"},
                                                    {"train-score"},
                                                    {"sample"},
                                                    {"ablate"}};
  int compared = 0;
  std::vector<std::string> mismatched;
  for (std::size_t c = 0; c < commands.size(); ++c) {
    const fs::path a = work / ("run" + std::to_string(c)), b = work / ("rerun" + std::to_string(c));
    auto args = commands[c];
    args.insert(args.end(), {"--config", cfg.string(), "--out", a.string()});
    if (cli(args) != kExitOk || cli({"rerun", (a / "manifest.json").string(), "--out", b.string()}) != kExitOk)
      return {false, "command failed: " + commands[c][0]};
    for (const auto& e : fs::directory_iterator(a)) {
      const auto ext = e.path().extension();
      if (ext != ".f32raw" && ext != ".ckpt") continue;
      ++compared;
      if (bytes(e.path()) != bytes(b / e.path().filename()))
        mismatched.push_back(commands[c][0] + "/" + e.path().filename().string());
    }
  }
  std::string detail = std::to_string(commands.size()) + " commands, " + std::to_string(compared) + " arrays";
  for (const auto& m : mismatched) detail += ", differs: " + m;
  return {mismatched.empty() && compared > 0, detail};
}

// Trains the desk score model through the CLI unless a checkpoint for the same
// resolved configuration is cached.
fs::path desk_model(const RunConfig& cfg, const fs::path& config_file, const fs::path& cache) {
  const fs::path dir = cache / ("model_" + config_hash(cfg));
  const fs::path ckpt = dir / "model.ckpt";
  if (fs::exists(ckpt)) {
    std::cout << "using cached score model " << ckpt << std::endl;
    return ckpt;
  }
  std::cout << "training the score model into " << dir << std::endl;
  const fs::path tmp = cache / "training";
  fs::remove_all(tmp);
  if (cli({"train-score", "--config", config_file.string(), "--out", tmp.string()}) != kExitOk)
    throw std::runtime_error("score model training failed");
  fs::remove_all(dir);
  fs::create_directories(cache);
  fs::rename(tmp, dir);
  return ckpt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string only, cache = DOSMCT_ACCEPTANCE_CACHE, config = DOSMCT_ACCEPTANCE_CONFIG, checkpoint;
  app.add_option("--only", only, "Comma-separated criterion numbers");
  app.add_option("--cache", cache, "Directory for the cached score model");
  app.add_option("--config", config, "Desk run configuration");
  app.add_option("--checkpoint", checkpoint, "Use this score model instead of training one");
  CLI11_PARSE(app, argc, argv);

  std::set<int> selected;
  {
    std::stringstream ss(only);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) selected.insert(std::stoi(tok));
  }
  auto wanted = [&](int id) { return selected.empty() || selected.count(id) > 0; };

  Desk desk;
  auto prepare_desk = [&] {
    if (desk.model) return;
    desk.cfg = load_config(config);
    desk.truth = make_phantom(desk.cfg.phantom);
    desk.range = desk.cfg.data_range > 0.0 ? desk.cfg.data_range : value_range(desk.truth);
    const fs::path ckpt = checkpoint.empty() ? desk_model(desk.cfg, config, cache) : fs::path(checkpoint);
    desk.model = std::make_shared<const DenoiserModel>(load_checkpoint(ckpt));
  };

  struct Criterion {
    int id;
    std::string name;
    double limit_s;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "projector adjoint identity and dense oracle", 10, adjoint_identity},
      {2, "SIRT matches the least-squares oracle", 5, sirt_oracle},
      {3, "mixture score matches finite differences", 1, mixture_score},
      {4, "PC sampler reproduces a 2-D standard normal", 60, pc_normal},
      {5, "x0 estimator unbiased with 1/N variance", 60, estimator_checks},
      {6, "trained toy denoiser matches the Gaussian score", 600, toy_denoiser},
      {7, "PSNR ordering DOSM > FISTA > FBP", 900, [&] { return ordering(desk); }},
      {8, "PSNR non-decreasing in N and K", 2700, [&] { return ablation(desk); }},
      {9, "reruns are byte-identical", 600,
       [&] { return determinism(fs::path(cache) / "determinism", "zero"); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!wanted(c.id)) continue;
    Verdict v;
    double secs = 0.0;
    try {
      if (c.id == 7 || c.id == 8) prepare_desk();
      const auto t0 = Clock::now();
      v = c.run();
      secs = std::chrono::duration<double>(Clock::now() - t0).count();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const bool in_time = secs <= c.limit_s;
    const bool pass = v.pass && in_time;
    if (!pass) ++failed;
    std::printf("%s criterion %d: %s (%s; %.1f s of %.0f s)\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                v.detail.c_str(), secs, c.limit_s);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
