#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dosmct/ensemble.hpp"
#include "dosmct/geometry.hpp"
#include "dosmct/projector.hpp"
#include "dosmct/rng.hpp"
#include "dosmct/score.hpp"

namespace dosmct {

// proximal: x <- (x_dc + beta u) / (1 + beta).
// literal:  x <- x_dc + beta (x_prev - u), x_prev being x before the step.
enum class CouplingMode { proximal, literal };
// Where the data-consistency sweep starts each outer step: from the
// generative iterate u, or from the previous x.
enum class DcStart { generative, previous };
enum class LoopOrder { generative_first, dc_first };
// shared: every channel receives the correction computed from the residual of
// the weighted mean. per_channel: each channel is corrected from its own
// residual.
enum class DcResidual { shared, per_channel };

struct DosmConfig {
  int n_channels = 5;
  NoiseSchedule schedule{0.01, 378.0, 200};
  int dc_inner_iters = 20;
  double beta = 0.1;
  double corrector_snr = 0.16;
  int n_corrector_steps = 1;
  std::string weights_mode = "uniform";
  std::uint64_t seed = 0;
  CouplingMode coupling = CouplingMode::proximal;
  DcStart dc_start = DcStart::generative;
  LoopOrder order = LoopOrder::generative_first;
  DcResidual dc_residual = DcResidual::shared;
  // Off: zero initial state and no noise in predictor or corrector.
  bool inject_noise = true;

  void validate() const;
};

struct StepRecord {
  std::size_t step = 0;
  double sigma = 0.0;
  double residual = 0.0;  // ||y - A x0_hat||
  std::vector<double> channel_norms;
  std::optional<double> psnr, ssim;
  int corrector_skips = 0;
};

struct ReconTrace {
  std::vector<StepRecord> steps;
  // "step,residual,psnr,ssim"; missing metrics are left empty.
  std::string csv() const;
};

struct ReconResult {
  Image image;
  ReconTrace trace;
};

// x0_hat = sum_n w_n x_n.
Image estimate_x0(const ChannelEnsemble& ens);

// One channel stream per ensemble member, derived from the master seed.
std::vector<Rng> channel_streams(std::uint64_t seed, std::size_t n);

// u_n = x_n + (s_i^2 - s_{i-1}^2) s(x_n, i) + sqrt(s_i^2 - s_{i-1}^2) z, 1 <= i < T.
void predictor_step(ChannelEnsemble& ens, std::size_t i, const ScoreFunction& score,
                    std::vector<Rng>& rngs, bool inject_noise = true);

// Langevin refinement of u at level i with the SNR step rule
// eps = 2 (r ||z|| / ||s||)^2. Channels whose score is zero are skipped;
// returns the number of skipped updates.
int corrector_step(ChannelEnsemble& ens, std::size_t i, const ScoreFunction& score,
                   std::vector<Rng>& rngs, double snr, int n_steps, bool inject_noise = true);

// K SIRT steps on the ensemble; residuals (before each step) are appended
// when non-null. In per_channel mode the largest channel residual is recorded.
void data_consistency_sweep(ChannelEnsemble& ens, const Sinogram& y, const SirtWeights& sw,
                            const RayProjector& proj, int k,
                            std::vector<double>* residuals = nullptr,
                            DcResidual mode = DcResidual::shared);

// x_prev is only read in literal mode.
void coupling_step(ChannelEnsemble& ens, double beta, CouplingMode mode = CouplingMode::proximal,
                   const std::vector<Image>* x_prev = nullptr);

// Full DOSM reconstruction. `truth`, when given, adds PSNR/SSIM to the trace.
ReconResult reconstruct(const Sinogram& y, const ImageGrid& grid, const ScoreFunction& score,
                        const DosmConfig& cfg, const Image* truth = nullptr);

// Unconditional VE predictor-corrector sampler for a single channel.
Image pc_sample(const ImageGrid& grid, const ScoreFunction& score, std::uint64_t seed,
                double snr, int n_corrector_steps);

std::string to_string(CouplingMode m);
std::string to_string(DcStart m);
std::string to_string(LoopOrder m);
std::string to_string(DcResidual m);
CouplingMode coupling_from_string(const std::string& s);
DcStart dc_start_from_string(const std::string& s);
LoopOrder loop_order_from_string(const std::string& s);
DcResidual dc_residual_from_string(const std::string& s);

}  // namespace dosmct
