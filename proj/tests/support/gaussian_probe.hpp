#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "dosmct/denoiser.hpp"
#include "dosmct/rng.hpp"
#include "dosmct/score.hpp"

namespace dosmct::probe {

struct GaussianToy {
  ImageGrid grid{12, 12, 1.0};
  double mean = 0.3;
  double sd = 0.15;
  NoiseSchedule schedule{0.01, 10.0, 100};

  GaussianMixturePrior prior() const { return {{{{mean}, sd * sd, 1.0}}}; }

  std::vector<Image> samples(int count, std::uint64_t seed) const {
    Rng rng(seed);
    std::vector<Image> out;
    for (int k = 0; k < count; ++k) {
      Image img(grid);
      for (double& v : img.values) v = mean + sd * rng.normal();
      out.push_back(std::move(img));
    }
    return out;
  }
};

struct ProbeResult {
  std::vector<double> sigma;
  std::vector<double> level_cosine;
  double cosine = 0.0;          // over all probes, sigma-scaled scores
  double relative_error = 0.0;  // || sigma (s - s*) || / || sigma s* ||
};

// Probes x_t ~ N(mean, sd^2 + sigma^2) at ten schedule levels spread from
// sigma_min to sigma_max, five images per level. Scores are compared after
// scaling by sigma, the weighting of the score-matching objective.
inline ProbeResult probe_model(const DenoiserModel& model, const GaussianToy& toy,
                               std::uint64_t seed = 17) {
  const GaussianMixturePrior prior = toy.prior();
  Rng rng(seed);
  ProbeResult r;
  double ab = 0.0, aa = 0.0, bb = 0.0;
  const int levels = 10;
  const int last = toy.schedule.n_steps - 1;
  for (int k = 0; k < levels; ++k) {
    const std::size_t i = static_cast<std::size_t>(k * last / (levels - 1));
    const double sigma = sigma_at(toy.schedule, i);
    const double spread = std::sqrt(toy.sd * toy.sd + sigma * sigma);
    double lab = 0.0, laa = 0.0, lbb = 0.0;
    for (int p = 0; p < 5; ++p) {
      Image xt(toy.grid);
      for (double& v : xt.values) v = toy.mean + spread * rng.normal();
      const Image s = model.score(xt, sigma);
      const Image t = analytic_score(prior, xt, sigma);
      for (std::size_t j = 0; j < s.values.size(); ++j) {
        const double a = sigma * s.values[j], b = sigma * t.values[j];
        lab += a * b;
        laa += a * a;
        lbb += b * b;
      }
    }
    r.sigma.push_back(sigma);
    r.level_cosine.push_back(lab / std::sqrt(laa * lbb));
    ab += lab;
    aa += laa;
    bb += lbb;
  }
  r.cosine = ab / std::sqrt(aa * bb);
  r.relative_error = std::sqrt(std::max(0.0, aa - 2.0 * ab + bb) / bb);
  return r;
}

inline DenoiserModel train_toy(const GaussianToy& toy, int count, int epochs, double lr) {
  DenoiserArch arch;
  arch.hidden_channels = 8;
  arch.dilations = {1, 2, 1};
  DenoiserModel model(arch);
  model.initialize(14);
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 4;
  cfg.learning_rate = lr;
  cfg.seed = 15;
  dsm_train(model, toy.samples(count, 16), toy.schedule, cfg);
  return model;
}

}  // namespace dosmct::probe
