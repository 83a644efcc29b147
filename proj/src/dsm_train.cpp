#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dosmct/denoiser.hpp"
#include "dosmct/rng.hpp"

namespace dosmct {

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("train: learning_rate must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw std::invalid_argument("train: Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw std::invalid_argument("train: adam_eps must be positive");
  if (crop < 0) throw std::invalid_argument("train: crop must be >= 0");
}

TrainReport dsm_train(DenoiserModel& model, const std::vector<Image>& dataset,
                      const NoiseSchedule& schedule, const TrainConfig& cfg,
                      const std::function<void(int, double)>& on_epoch) {
  cfg.validate();
  schedule.validate();
  if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
  const ImageGrid& grid = dataset.front().grid;
  for (const Image& img : dataset) {
    if (!(img.grid == grid)) throw std::invalid_argument("train: images must share one grid");
    img.validate();
  }
  const int cx = cfg.crop ? cfg.crop : grid.nx;
  const int cy = cfg.crop ? cfg.crop : grid.ny;
  if (cx > grid.nx || cy > grid.ny) throw std::invalid_argument("train: crop exceeds the image size");

  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n_params = model.parameter_count();
  const std::size_t n_pix = static_cast<std::size_t>(cx) * cy;
  std::vector<double> grad(n_params), m(n_params, 0.0), v(n_params, 0.0);
  std::vector<double> x0(n_pix), z(n_pix);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  DenoiserWorkspace ws;
  Rng rng(cfg.seed);
  TrainReport report;
  long adam_t = 0;
  auto params = model.parameters();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const Image& img = dataset[order[k]];
        const int ox = static_cast<int>(rng.below(static_cast<std::uint64_t>(grid.nx - cx + 1)));
        const int oy = static_cast<int>(rng.below(static_cast<std::uint64_t>(grid.ny - cy + 1)));
        const bool fx = cfg.flips && rng.below(2) == 1;
        const bool fy = cfg.flips && rng.below(2) == 1;
        for (int y = 0; y < cy; ++y)
          for (int x = 0; x < cx; ++x)
            x0[static_cast<std::size_t>(y) * cx + x] =
                img.at(ox + (fx ? cx - 1 - x : x), oy + (fy ? cy - 1 - y : y));
        const std::size_t step = rng.below(static_cast<std::uint64_t>(schedule.n_steps));
        const double sigma = sigma_at(schedule, step);
        rng.fill_normal(z);
        const double loss = model.accumulate_gradient(x0, z, cx, cy, sigma, grad, ws);
        if (!std::isfinite(loss))
          throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", sample " + std::to_string(k) + ", sigma " +
                                   std::to_string(sigma));
        epoch_loss += loss;
        ++report.samples;
      }
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      ++adam_t;
      const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(adam_t));
      const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(adam_t));
      for (std::size_t p = 0; p < n_params; ++p) {
        const double g = grad[p] * inv_batch;
        m[p] = cfg.adam_beta1 * m[p] + (1.0 - cfg.adam_beta1) * g;
        v[p] = cfg.adam_beta2 * v[p] + (1.0 - cfg.adam_beta2) * g * g;
        const double update = cfg.learning_rate * (m[p] / bc1) / (std::sqrt(v[p] / bc2) + cfg.adam_eps);
        params[p] = static_cast<float>(static_cast<double>(params[p]) - update);
      }
    }
    epoch_loss /= static_cast<double>(order.size());
    report.epoch_loss.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace dosmct
