#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dosmct/ensemble.hpp"
#include "dosmct/geometry.hpp"
#include "dosmct/projector.hpp"

namespace dosmct {

// Filtered back projection. Ram-Lak filtering in the frequency domain with
// zero padding to the next power of two, then pixel-driven back projection
// with linear interpolation. Fan mode applies the equiangular (arc) or
// equispaced (flat) weighting for a full 2pi scan.
Image fbp(const Sinogram& sino, const ImageGrid& grid);

// One SIRT update shared by every channel:
//   r = y - A(sum_n w_n x_n);  x_n <- x_n + D A^T E r.
// Returns ||r||_2 (the residual before the update). Throws
// std::runtime_error when r is not finite.
double sirt_step(ChannelEnsemble& ens, const Sinogram& y, const SirtWeights& sw,
                 const RayProjector& proj);

// Single-image SIRT from zero; residual_history receives ||y - A x_k|| for
// k = 0..n_iters when non-null.
Image sirt(const Sinogram& y, const ImageGrid& grid, int n_iters,
           std::vector<double>* residual_history = nullptr);

struct FistaConfig {
  double lambda = 0.0;
  int n_iters = 100;
  std::optional<double> step;  // 1/L; empty means power iteration ("auto")
  int tv_inner_iters = 20;
  int power_max_iters = 100;
  double power_tol = 1e-6;

  void validate() const;
};

struct FistaResult {
  Image image;
  std::vector<double> objective;  // F(x_k), k = 0..n_iters
  double step = 0.0;
};

// argmin 1/2 ||y - A x||^2 + lambda TV(x) by FISTA, starting from zero.
FistaResult fista_tv(const Sinogram& y, const ImageGrid& grid, const FistaConfig& cfg);

// Best lambda (by PSNR against `truth`) among `lambdas`; returns the index.
std::size_t fista_lambda_search(const Sinogram& y, const Image& truth, FistaConfig cfg,
                                std::span<const double> lambdas, double data_range,
                                std::vector<double>* psnrs = nullptr);

// Isotropic total variation, forward differences, reflexive boundary.
double tv_norm(std::span<const double> x, int nx, int ny);
// argmin_z 1/2 ||z - v||^2 + weight * TV(z), by `iters` fast dual projection
// steps.
void tv_prox(std::span<const double> v, int nx, int ny, double weight, int iters,
             std::span<double> out);

// Largest eigenvalue of A^T A by power iteration from the all-ones vector.
// Throws std::runtime_error if the relative change is still above tol after
// max_iters iterations.
double operator_norm_squared(const RayProjector& proj, int max_iters, double tol);

}  // namespace dosmct
