#include <cmath>
#include <stdexcept>
#include <string>

#include "dosmct/classical.hpp"
#include "dosmct/parallel.hpp"

namespace dosmct {

ChannelEnsemble ChannelEnsemble::uniform(const ImageGrid& grid, std::size_t n) {
  if (n < 1) throw std::invalid_argument("ensemble: at least one channel is required");
  ChannelEnsemble e;
  e.x.assign(n, Image(grid));
  e.u.assign(n, Image(grid));
  e.weights.assign(n, 1.0 / static_cast<double>(n));
  return e;
}

void ChannelEnsemble::validate() const {
  if (x.empty()) throw std::invalid_argument("ensemble: no channels");
  if (weights.size() != x.size()) throw std::invalid_argument("ensemble: one weight per channel required");
  if (!u.empty() && u.size() != x.size()) throw std::invalid_argument("ensemble: x/u channel count differs");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("ensemble: weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("ensemble: weights must sum to 1");
  for (const auto& img : x)
    if (!(img.grid == x.front().grid) || img.values.size() != img.grid.size())
      throw std::invalid_argument("ensemble: channels must share one grid");
  for (const auto& img : u)
    if (!(img.grid == x.front().grid) || img.values.size() != img.grid.size())
      throw std::invalid_argument("ensemble: channels must share one grid");
}

Image weighted_mean(const std::vector<Image>& images, const std::vector<double>& weights) {
  if (images.empty() || images.size() != weights.size())
    throw std::invalid_argument("weighted_mean: one weight per image required");
  Image out(images.front().grid);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const double w = weights[n];
    const auto& v = images[n].values;
    for (std::size_t j = 0; j < v.size(); ++j) out.values[j] += w * v[j];
  }
  return out;
}

double sirt_step(ChannelEnsemble& ens, const Sinogram& y, const SirtWeights& sw,
                 const RayProjector& proj) {
  if (y.values.size() != proj.n_rays() || sw.row_inv.size() != proj.n_rays() ||
      sw.col_inv.size() != proj.n_pixels())
    throw std::invalid_argument("sirt_step: sinogram/weights do not match the projector");
  const Image mean = weighted_mean(ens.x, ens.weights);

  std::vector<double> r(proj.n_rays());
  proj.forward(mean.values, r);
  double norm2 = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = y.values[i] - r[i];
    norm2 += r[i] * r[i];
  }
  if (!std::isfinite(norm2))
    throw std::runtime_error("sirt_step: non-finite residual (||r||^2 = " + std::to_string(norm2) + ")");
  for (std::size_t i = 0; i < r.size(); ++i) r[i] *= sw.row_inv[i];

  std::vector<double> correction(proj.n_pixels());
  proj.back(r, correction);
  for (std::size_t j = 0; j < correction.size(); ++j) correction[j] *= sw.col_inv[j];

  parallel_for(ens.size(), [&](std::size_t n) {
    auto& v = ens.x[n].values;
    for (std::size_t j = 0; j < v.size(); ++j) v[j] += correction[j];
  });
  return std::sqrt(norm2);
}

Image sirt(const Sinogram& y, const ImageGrid& grid, int n_iters, std::vector<double>* residual_history) {
  y.validate();
  RayProjector proj(grid, y.geometry);
  const SirtWeights sw = sirt_weights(proj);
  ChannelEnsemble ens;
  ens.x.assign(1, Image(grid));
  ens.weights = {1.0};
  if (residual_history) residual_history->clear();
  for (int k = 0; k < n_iters; ++k) {
    const double r = sirt_step(ens, y, sw, proj);
    if (residual_history) residual_history->push_back(r);
  }
  if (residual_history) {
    std::vector<double> ax(proj.n_rays());
    proj.forward(ens.x[0].values, ax);
    double s = 0.0;
    for (std::size_t i = 0; i < ax.size(); ++i) s += (y.values[i] - ax[i]) * (y.values[i] - ax[i]);
    residual_history->push_back(std::sqrt(s));
  }
  return std::move(ens.x[0]);
}

}  // namespace dosmct
