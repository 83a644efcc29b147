#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "dosmct/geometry.hpp"

namespace dosmct {

// Geometric VE-SDE noise levels sigma_i = sigma_min (sigma_max/sigma_min)^(i/(T-1)).
struct NoiseSchedule {
  double sigma_min = 0.01;
  double sigma_max = 378.0;
  int n_steps = 2000;

  void validate() const;
  double sigma(std::size_t i) const;
};

// Throws std::out_of_range unless 0 <= i < T.
double sigma_at(const NoiseSchedule& schedule, std::size_t i);

// s(x, i) ~ grad_x log p_{sigma_i}(x).
class ScoreFunction {
 public:
  virtual ~ScoreFunction() = default;
  virtual const NoiseSchedule& schedule() const = 0;
  virtual Image evaluate(const Image& x, std::size_t step) const = 0;
};

// Isotropic Gaussian component; a one-element mean is broadcast to every
// pixel.
struct MixtureComponent {
  std::vector<double> mean;
  double variance = 1.0;
  double weight = 1.0;
};

struct GaussianMixturePrior {
  std::vector<MixtureComponent> components;

  void validate() const;
  // log p_sigma(x) of the prior convolved with N(0, sigma^2 I).
  double log_density(std::span<const double> x, double sigma) const;
};

// Exact score of the sigma-perturbed mixture: component variances become
// s^2 + sigma^2 and responsibilities are computed in log space.
Image analytic_score(const GaussianMixturePrior& prior, const Image& x, double sigma);

class AnalyticScore final : public ScoreFunction {
 public:
  AnalyticScore(GaussianMixturePrior prior, NoiseSchedule schedule);
  const NoiseSchedule& schedule() const override { return schedule_; }
  Image evaluate(const Image& x, std::size_t step) const override;
  const GaussianMixturePrior& prior() const { return prior_; }

 private:
  GaussianMixturePrior prior_;
  NoiseSchedule schedule_;
};

// Identically zero score field.
class ZeroScore final : public ScoreFunction {
 public:
  explicit ZeroScore(NoiseSchedule schedule) : schedule_(schedule) {}
  const NoiseSchedule& schedule() const override { return schedule_; }
  Image evaluate(const Image& x, std::size_t) const override { return Image(x.grid); }

 private:
  NoiseSchedule schedule_;
};

}  // namespace dosmct
