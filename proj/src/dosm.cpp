#include "dosmct/dosm.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "dosmct/classical.hpp"
#include "dosmct/metrics.hpp"
#include "dosmct/parallel.hpp"

namespace dosmct {

namespace {

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

void require_finite(const std::vector<Image>& images, const char* what, std::size_t step) {
  for (std::size_t n = 0; n < images.size(); ++n)
    for (double v : images[n].values)
      if (!std::isfinite(v))
        throw std::runtime_error(std::string("dosm: non-finite ") + what + " in channel " +
                                 std::to_string(n) + " at step " + std::to_string(step));
}

// u = x + sigma_0^2 s(x, 0): the noise-free final denoising step.
void tweedie_step(ChannelEnsemble& ens, const ScoreFunction& score) {
  const double s0 = sigma_at(score.schedule(), 0);
  parallel_for(ens.size(), [&](std::size_t n) {
    const Image s = score.evaluate(ens.x[n], 0);
    for (std::size_t j = 0; j < s.values.size(); ++j)
      ens.u[n].values[j] = ens.x[n].values[j] + s0 * s0 * s.values[j];
  });
}

void init_channels(ChannelEnsemble& ens, std::vector<Rng>& rngs, double sigma_max, bool noise) {
  for (std::size_t n = 0; n < ens.size(); ++n) {
    if (noise) {
      rngs[n].fill_normal(ens.x[n].values);
      for (double& v : ens.x[n].values) v *= sigma_max;
    }
    ens.u[n] = ens.x[n];
  }
}

}  // namespace

void DosmConfig::validate() const {
  if (n_channels < 1) throw std::invalid_argument("dosm: n_channels must be >= 1");
  if (dc_inner_iters < 0) throw std::invalid_argument("dosm: dc_inner_iters must be >= 0");
  if (!(beta >= 0.0)) throw std::invalid_argument("dosm: beta must be >= 0");
  if (!(corrector_snr > 0.0)) throw std::invalid_argument("dosm: corrector_snr must be positive");
  if (n_corrector_steps < 0) throw std::invalid_argument("dosm: n_corrector_steps must be >= 0");
  if (weights_mode != "uniform") throw std::invalid_argument("dosm: weights_mode must be \"uniform\"");
  schedule.validate();
}

std::string ReconTrace::csv() const {
  std::string out = "step,residual,psnr,ssim\n";
  char buf[128];
  for (const auto& r : steps) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,", r.step, r.residual);
    out += buf;
    if (r.psnr) {
      std::snprintf(buf, sizeof(buf), "%.17g", *r.psnr);
      out += buf;
    }
    out += ',';
    if (r.ssim) {
      std::snprintf(buf, sizeof(buf), "%.17g", *r.ssim);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

Image estimate_x0(const ChannelEnsemble& ens) {
  ens.validate();
  return weighted_mean(ens.x, ens.weights);
}

std::vector<Rng> channel_streams(std::uint64_t seed, std::size_t n) {
  std::vector<Rng> rngs;
  rngs.reserve(n);
  for (std::size_t c = 0; c < n; ++c) rngs.emplace_back(derive_seed(seed, c));
  return rngs;
}

void predictor_step(ChannelEnsemble& ens, std::size_t i, const ScoreFunction& score,
                    std::vector<Rng>& rngs, bool inject_noise) {
  const NoiseSchedule& sch = score.schedule();
  if (i < 1 || i >= static_cast<std::size_t>(sch.n_steps))
    throw std::out_of_range("predictor_step: step must satisfy 1 <= i < T");
  if (rngs.size() != ens.size()) throw std::invalid_argument("predictor_step: one stream per channel");
  const double si = sigma_at(sch, i), sp = sigma_at(sch, i - 1);
  const double dv = si * si - sp * sp;
  const double dz = std::sqrt(dv);
  if (ens.u.size() != ens.x.size()) ens.u = ens.x;
  parallel_for(ens.size(), [&](std::size_t n) {
    const Image s = score.evaluate(ens.x[n], i);
    auto& u = ens.u[n].values;
    const auto& x = ens.x[n].values;
    for (std::size_t j = 0; j < u.size(); ++j) u[j] = x[j] + dv * s.values[j];
    if (inject_noise)
      for (std::size_t j = 0; j < u.size(); ++j) u[j] += dz * rngs[n].normal();
  });
  require_finite(ens.u, "predictor state", i);
}

int corrector_step(ChannelEnsemble& ens, std::size_t i, const ScoreFunction& score,
                   std::vector<Rng>& rngs, double snr, int n_steps, bool inject_noise) {
  if (i >= static_cast<std::size_t>(score.schedule().n_steps))
    throw std::out_of_range("corrector_step: step outside the schedule");
  if (rngs.size() != ens.size()) throw std::invalid_argument("corrector_step: one stream per channel");
  std::vector<int> skipped(ens.size(), 0);
  parallel_for(ens.size(), [&](std::size_t n) {
    auto& u = ens.u[n].values;
    std::vector<double> z(u.size());
    for (int k = 0; k < n_steps; ++k) {
      const Image s = score.evaluate(ens.u[n], i);
      rngs[n].fill_normal(z);
      const double sn = norm2(s.values);
      if (sn == 0.0) {
        ++skipped[n];
        continue;
      }
      const double ratio = snr * norm2(z) / sn;
      const double eps = 2.0 * ratio * ratio;
      const double amp = std::sqrt(2.0 * eps);
      for (std::size_t j = 0; j < u.size(); ++j) {
        u[j] += eps * s.values[j];
        if (inject_noise) u[j] += amp * z[j];
      }
    }
  });
  require_finite(ens.u, "corrector state", i);
  int total = 0;
  for (int s : skipped) total += s;
  return total;
}

void data_consistency_sweep(ChannelEnsemble& ens, const Sinogram& y, const SirtWeights& sw,
                            const RayProjector& proj, int k, std::vector<double>* residuals,
                            DcResidual mode) {
  if (k < 0) throw std::invalid_argument("data_consistency_sweep: K must be >= 0");
  if (mode == DcResidual::shared) {
    for (int it = 0; it < k; ++it) {
      const double r = sirt_step(ens, y, sw, proj);
      if (residuals) residuals->push_back(r);
    }
    return;
  }
  std::vector<double> worst(static_cast<std::size_t>(k), 0.0);
  for (std::size_t n = 0; n < ens.size(); ++n) {
    ChannelEnsemble one = ChannelEnsemble::uniform(ens.x[n].grid, 1);
    one.x[0] = std::move(ens.x[n]);
    for (double& w : worst) w = std::max(w, sirt_step(one, y, sw, proj));
    ens.x[n] = std::move(one.x[0]);
  }
  if (residuals) residuals->insert(residuals->end(), worst.begin(), worst.end());
}

void coupling_step(ChannelEnsemble& ens, double beta, CouplingMode mode,
                   const std::vector<Image>* x_prev) {
  if (!(beta >= 0.0)) throw std::invalid_argument("coupling_step: beta must be >= 0");
  if (beta == 0.0) return;
  if (ens.u.size() != ens.x.size()) throw std::invalid_argument("coupling_step: u is missing");
  if (mode == CouplingMode::literal && (!x_prev || x_prev->size() != ens.size()))
    throw std::invalid_argument("coupling_step: literal mode needs the previous x");
  const double inv = 1.0 / (1.0 + beta);
  for (std::size_t n = 0; n < ens.size(); ++n) {
    auto& x = ens.x[n].values;
    const auto& u = ens.u[n].values;
    if (mode == CouplingMode::proximal) {
      for (std::size_t j = 0; j < x.size(); ++j) x[j] = (x[j] + beta * u[j]) * inv;
    } else {
      const auto& xp = (*x_prev)[n].values;
      for (std::size_t j = 0; j < x.size(); ++j) x[j] += beta * (xp[j] - u[j]);
    }
  }
}

ReconResult reconstruct(const Sinogram& y, const ImageGrid& grid, const ScoreFunction& score,
                        const DosmConfig& cfg, const Image* truth) {
  cfg.validate();
  grid.validate();
  y.validate();
  const NoiseSchedule& sch = score.schedule();
  if (sch.n_steps != cfg.schedule.n_steps || sch.sigma_min != cfg.schedule.sigma_min ||
      sch.sigma_max != cfg.schedule.sigma_max)
    throw std::invalid_argument("dosm: score schedule differs from the configured schedule");
  if (truth && !(truth->grid == grid)) throw std::invalid_argument("dosm: truth grid differs");

  const RayProjector proj(grid, y.geometry);
  const SirtWeights sw = sirt_weights(proj);
  ChannelEnsemble ens = ChannelEnsemble::uniform(grid, static_cast<std::size_t>(cfg.n_channels));
  std::vector<Rng> rngs = channel_streams(cfg.seed, ens.size());
  init_channels(ens, rngs, sch.sigma_max, cfg.inject_noise);
  const double data_range = truth ? value_range(*truth) : 0.0;

  ReconResult res;
  std::vector<double> ax(proj.n_rays());
  std::vector<Image> x_prev;
  for (std::size_t i = static_cast<std::size_t>(sch.n_steps); i-- > 0;) {
    StepRecord rec;
    rec.step = i;
    rec.sigma = sigma_at(sch, i);
    if (cfg.coupling == CouplingMode::literal) x_prev = ens.x;

    auto generative = [&] {
      if (i == 0) {
        tweedie_step(ens, score);
        return;
      }
      predictor_step(ens, i, score, rngs, cfg.inject_noise);
      rec.corrector_skips = corrector_step(ens, i, score, rngs, cfg.corrector_snr,
                                           cfg.n_corrector_steps, cfg.inject_noise);
    };
    if (cfg.order == LoopOrder::generative_first) {
      generative();
      if (cfg.dc_start == DcStart::generative)
        for (std::size_t n = 0; n < ens.size(); ++n) ens.x[n].values = ens.u[n].values;
      data_consistency_sweep(ens, y, sw, proj, cfg.dc_inner_iters, nullptr, cfg.dc_residual);
    } else {
      data_consistency_sweep(ens, y, sw, proj, cfg.dc_inner_iters, nullptr, cfg.dc_residual);
      generative();
    }
    coupling_step(ens, cfg.beta, cfg.coupling, &x_prev);
    require_finite(ens.x, "state", i);

    const Image x0 = estimate_x0(ens);
    proj.forward(x0.values, ax);
    double r2 = 0.0;
    for (std::size_t k = 0; k < ax.size(); ++k) r2 += (y.values[k] - ax[k]) * (y.values[k] - ax[k]);
    rec.residual = std::sqrt(r2);
    for (const Image& x : ens.x) rec.channel_norms.push_back(norm2(x.values));
    if (truth && data_range > 0.0) {
      rec.psnr = psnr(x0, *truth, data_range);
      if (grid.nx >= SsimParams{}.window && grid.ny >= SsimParams{}.window)
        rec.ssim = ssim(x0, *truth, data_range);
    }
    res.trace.steps.push_back(std::move(rec));
  }
  res.image = estimate_x0(ens);
  return res;
}

Image pc_sample(const ImageGrid& grid, const ScoreFunction& score, std::uint64_t seed, double snr,
                int n_corrector_steps) {
  grid.validate();
  const NoiseSchedule& sch = score.schedule();
  ChannelEnsemble ens = ChannelEnsemble::uniform(grid, 1);
  std::vector<Rng> rngs = channel_streams(seed, 1);
  init_channels(ens, rngs, sch.sigma_max, true);
  for (std::size_t i = static_cast<std::size_t>(sch.n_steps); i-- > 1;) {
    predictor_step(ens, i, score, rngs);
    corrector_step(ens, i, score, rngs, snr, n_corrector_steps);
    ens.x[0].values = ens.u[0].values;
  }
  tweedie_step(ens, score);
  ens.x[0].values = ens.u[0].values;
  return estimate_x0(ens);
}

std::string to_string(CouplingMode m) { return m == CouplingMode::proximal ? "proximal" : "literal"; }
std::string to_string(DcStart m) { return m == DcStart::generative ? "u" : "x"; }
std::string to_string(LoopOrder m) {
  return m == LoopOrder::generative_first ? "generative_first" : "dc_first";
}

CouplingMode coupling_from_string(const std::string& s) {
  if (s == "proximal") return CouplingMode::proximal;
  if (s == "literal") return CouplingMode::literal;
  throw std::invalid_argument("unknown coupling mode \"" + s + "\" (expected proximal|literal)");
}

std::string to_string(DcResidual m) { return m == DcResidual::shared ? "shared" : "per_channel"; }

DcResidual dc_residual_from_string(const std::string& s) {
  if (s == "shared") return DcResidual::shared;
  if (s == "per_channel") return DcResidual::per_channel;
  throw std::invalid_argument("unknown dc_residual \"" + s + "\" (expected shared|per_channel)");
}

DcStart dc_start_from_string(const std::string& s) {
  if (s == "u") return DcStart::generative;
  if (s == "x") return DcStart::previous;
  throw std::invalid_argument("unknown dc_start \"" + s + "\" (expected u|x)");
}

LoopOrder loop_order_from_string(const std::string& s) {
  if (s == "generative_first") return LoopOrder::generative_first;
  if (s == "dc_first") return LoopOrder::dc_first;
  throw std::invalid_argument("unknown loop order \"" + s + "\" (expected generative_first|dc_first)");
}

}  // namespace dosmct
