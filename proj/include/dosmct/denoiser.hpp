#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "json.hpp"

#include "dosmct/geometry.hpp"
#include "dosmct/score.hpp"

namespace dosmct {

// Plain 3x3 convolution stack with ReLU between layers and zero padding.
// Input planes are c_in(sigma) x and a constant ln(sigma)/4 plane; the last
// layer emits one plane F.
struct DenoiserArch {
  int hidden_channels = 16;
  std::vector<int> dilations = {1, 2, 4, 2, 1};
  double sigma_data = 0.5;

  void validate() const;
  int layers() const { return static_cast<int>(dilations.size()); }
  int receptive_field() const;
};

// Preconditioning of the network around the denoiser
//   D(x; sigma) = c_skip x + c_out F(c_in x, c_noise),
// with score s = (D - x) / sigma^2.
struct Preconditioning {
  double c_skip, c_out, c_in, c_noise;
  static Preconditioning at(double sigma, double sigma_data);
};

// Scratch buffers for one forward/backward pass; reused across samples.
struct DenoiserWorkspace {
  std::vector<std::vector<float>> acts;
  std::vector<float> out, col, gcol, grad_out, grad_a, grad_b;
};

class DenoiserModel {
 public:
  explicit DenoiserModel(DenoiserArch arch = {});

  const DenoiserArch& arch() const { return arch_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<float> parameters() { return params_; }
  std::span<const float> parameters() const { return params_; }

  // He-normal weights, zero biases, zero last layer.
  void initialize(std::uint64_t seed);

  // Raw network output F for input planes built from x at noise level sigma.
  void network(std::span<const double> x, int nx, int ny, double sigma,
               std::span<double> out) const;
  Image denoise(const Image& x, double sigma) const;
  Image score(const Image& x, double sigma) const;

  // Adds d(loss)/d(params) to grad and returns the loss
  //   mean_pixels (F(x_t) - (x0 - c_skip x_t) / c_out)^2,  x_t = x0 + sigma z.
  double accumulate_gradient(std::span<const double> x0, std::span<const double> z, int nx,
                             int ny, double sigma, std::span<double> grad,
                             DenoiserWorkspace& ws) const;

  nlohmann::json descriptor() const;

 private:
  struct Layer {
    int cin, cout, dilation;
    std::size_t w_offset, b_offset;
  };
  void forward(std::span<const double> x, int nx, int ny, double sigma,
               DenoiserWorkspace& ws) const;

  DenoiserArch arch_;
  std::vector<Layer> layers_;
  std::vector<float> params_;
};

class DenoiserScore final : public ScoreFunction {
 public:
  DenoiserScore(std::shared_ptr<const DenoiserModel> model, NoiseSchedule schedule);
  const NoiseSchedule& schedule() const override { return schedule_; }
  Image evaluate(const Image& x, std::size_t step) const override;

 private:
  std::shared_ptr<const DenoiserModel> model_;
  NoiseSchedule schedule_;
};

struct TrainConfig {
  int epochs = 50;
  int batch_size = 8;
  double learning_rate = 2e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int crop = 0;  // square random crop size; 0 trains on whole images
  bool flips = false;  // random horizontal/vertical flips
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  std::size_t samples = 0;
  double seconds = 0.0;
};

// Denoising score matching with Adam. One epoch is one shuffled pass over the
// dataset; every sample draws a step index uniformly from [0, T) and fresh
// noise. Throws std::runtime_error on a non-finite loss.
TrainReport dsm_train(DenoiserModel& model, const std::vector<Image>& dataset,
                      const NoiseSchedule& schedule, const TrainConfig& cfg,
                      const std::function<void(int, double)>& on_epoch = {});

// Binary checkpoint:
//   "DOSMCKPT", u32 version, u64 descriptor length, descriptor JSON,
//   u64 parameter count, float32 LE parameters, u64 FNV-1a of all prior bytes.
inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_checkpoint(const std::filesystem::path& path, const DenoiserModel& model,
                     const nlohmann::json& extra = nlohmann::json::object());
DenoiserModel load_checkpoint(const std::filesystem::path& path,
                              nlohmann::json* descriptor = nullptr);

}  // namespace dosmct
