#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dosmct/score.hpp"

namespace dosmct {

namespace {

double mean_at(const MixtureComponent& c, std::size_t j) {
  return c.mean.size() == 1 ? c.mean[0] : c.mean[j];
}

// log w_k + log N(x; mu_k, (s_k^2 + sigma^2) I) for every component.
std::vector<double> component_log_terms(const GaussianMixturePrior& prior,
                                        std::span<const double> x, double sigma) {
  const double d = static_cast<double>(x.size());
  std::vector<double> terms;
  terms.reserve(prior.components.size());
  for (const auto& c : prior.components) {
    const double var = c.variance + sigma * sigma;
    double sq = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double r = x[j] - mean_at(c, j);
      sq += r * r;
    }
    terms.push_back(std::log(c.weight) - 0.5 * d * std::log(2.0 * std::numbers::pi * var) -
                    0.5 * sq / var);
  }
  return terms;
}

}  // namespace

void GaussianMixturePrior::validate() const {
  if (components.empty()) throw std::invalid_argument("mixture: no components");
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.weight > 0.0)) throw std::invalid_argument("mixture: weights must be positive");
    if (!(c.variance > 0.0)) throw std::invalid_argument("mixture: variances must be positive");
    if (c.mean.empty()) throw std::invalid_argument("mixture: component mean is empty");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("mixture: weights must sum to 1");
}

double GaussianMixturePrior::log_density(std::span<const double> x, double sigma) const {
  const auto terms = component_log_terms(*this, x, sigma);
  const double m = *std::max_element(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

Image analytic_score(const GaussianMixturePrior& prior, const Image& x, double sigma) {
  prior.validate();
  for (const auto& c : prior.components)
    if (c.mean.size() != 1 && c.mean.size() != x.values.size())
      throw std::invalid_argument("mixture: component mean does not match the image size");
  const auto terms = component_log_terms(prior, x.values, sigma);
  const double m = *std::max_element(terms.begin(), terms.end());
  std::vector<double> resp(terms.size());
  double total = 0.0;
  for (std::size_t k = 0; k < terms.size(); ++k) total += resp[k] = std::exp(terms[k] - m);

  Image out(x.grid);
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const auto& c = prior.components[k];
    const double scale = resp[k] / total / (c.variance + sigma * sigma);
    for (std::size_t j = 0; j < out.values.size(); ++j)
      out.values[j] -= scale * (x.values[j] - mean_at(c, j));
  }
  return out;
}

AnalyticScore::AnalyticScore(GaussianMixturePrior prior, NoiseSchedule schedule)
    : prior_(std::move(prior)), schedule_(schedule) {
  prior_.validate();
  schedule_.validate();
}

Image AnalyticScore::evaluate(const Image& x, std::size_t step) const {
  return analytic_score(prior_, x, sigma_at(schedule_, step));
}

}  // namespace dosmct
