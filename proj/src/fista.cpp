#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dosmct/classical.hpp"
#include "dosmct/metrics.hpp"

namespace dosmct {

namespace {

// Dual variables live on the forward-difference edges: p is (ny-1) x nx
// (vertical differences), q is ny x (nx-1) (horizontal differences).
struct DualField {
  std::vector<double> p, q;
  DualField(int nx, int ny)
      : p(static_cast<std::size_t>(std::max(ny - 1, 0)) * nx, 0.0),
        q(static_cast<std::size_t>(ny) * std::max(nx - 1, 0), 0.0) {}
};

// L(p, q) = -div: (p_{i,j} + q_{i,j} - p_{i-1,j} - q_{i,j-1}), with out of
// range terms zero.
void apply_l(const DualField& d, int nx, int ny, std::vector<double>& out) {
  for (int i = 0; i < ny; ++i)
    for (int j = 0; j < nx; ++j) {
      double v = 0.0;
      if (i < ny - 1) v += d.p[static_cast<std::size_t>(i) * nx + j];
      if (i > 0) v -= d.p[static_cast<std::size_t>(i - 1) * nx + j];
      if (j < nx - 1) v += d.q[static_cast<std::size_t>(i) * (nx - 1) + j];
      if (j > 0) v -= d.q[static_cast<std::size_t>(i) * (nx - 1) + j - 1];
      out[static_cast<std::size_t>(i) * nx + j] = v;
    }
}

// L^T(x) = -grad: p_{i,j} = x_{i,j} - x_{i+1,j}, q_{i,j} = x_{i,j} - x_{i,j+1}.
void apply_lt(const std::vector<double>& x, int nx, int ny, DualField& d) {
  for (int i = 0; i + 1 < ny; ++i)
    for (int j = 0; j < nx; ++j)
      d.p[static_cast<std::size_t>(i) * nx + j] =
          x[static_cast<std::size_t>(i) * nx + j] - x[static_cast<std::size_t>(i + 1) * nx + j];
  for (int i = 0; i < ny; ++i)
    for (int j = 0; j + 1 < nx; ++j)
      d.q[static_cast<std::size_t>(i) * (nx - 1) + j] =
          x[static_cast<std::size_t>(i) * nx + j] - x[static_cast<std::size_t>(i) * nx + j + 1];
}

// Projection onto {|(p_ij, q_ij)| <= 1} with the boundary conventions of
// isotropic TV (edge rows/cols have a single component).
void project_unit_ball(DualField& d, int nx, int ny) {
  for (int i = 0; i < ny; ++i)
    for (int j = 0; j < nx; ++j) {
      double* pp = i < ny - 1 ? &d.p[static_cast<std::size_t>(i) * nx + j] : nullptr;
      double* qq = j < nx - 1 ? &d.q[static_cast<std::size_t>(i) * (nx - 1) + j] : nullptr;
      const double a = pp ? *pp : 0.0, b = qq ? *qq : 0.0;
      const double n = std::sqrt(a * a + b * b);
      if (n > 1.0) {
        if (pp) *pp /= n;
        if (qq) *qq /= n;
      }
    }
}

double half_residual_sq(const RayProjector& proj, const std::vector<double>& x,
                        const std::vector<double>& y, std::vector<double>& ax) {
  proj.forward(x, ax);
  double s = 0.0;
  for (std::size_t i = 0; i < ax.size(); ++i) s += (ax[i] - y[i]) * (ax[i] - y[i]);
  return 0.5 * s;
}

}  // namespace

void FistaConfig::validate() const {
  if (n_iters < 1) throw std::invalid_argument("fista: n_iters must be >= 1");
  if (!(lambda >= 0.0)) throw std::invalid_argument("fista: lambda must be >= 0");
  if (step && !(*step > 0.0)) throw std::invalid_argument("fista: step must be positive");
  if (tv_inner_iters < 1) throw std::invalid_argument("fista: tv_inner_iters must be >= 1");
}

double tv_norm(std::span<const double> x, int nx, int ny) {
  double tv = 0.0;
  for (int i = 0; i < ny; ++i)
    for (int j = 0; j < nx; ++j) {
      const double c = x[static_cast<std::size_t>(i) * nx + j];
      const double dv = i + 1 < ny ? x[static_cast<std::size_t>(i + 1) * nx + j] - c : 0.0;
      const double dh = j + 1 < nx ? x[static_cast<std::size_t>(i) * nx + j + 1] - c : 0.0;
      tv += std::sqrt(dv * dv + dh * dh);
    }
  return tv;
}

void tv_prox(std::span<const double> v, int nx, int ny, double weight, int iters,
             std::span<double> out) {
  const std::size_t n = static_cast<std::size_t>(nx) * ny;
  if (weight <= 0.0) {
    std::copy(v.begin(), v.end(), out.begin());
    return;
  }
  DualField pq(nx, ny), rs(nx, ny), prev(nx, ny), grad(nx, ny);
  std::vector<double> tmp(n);
  double t = 1.0;
  const double step = 1.0 / (8.0 * weight);
  for (int k = 0; k < iters; ++k) {
    // (p, q) = P[(r, s) + 1/(8 weight) L^T(v - weight L(r, s))]
    apply_l(rs, nx, ny, tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = v[i] - weight * tmp[i];
    apply_lt(tmp, nx, ny, grad);
    prev = pq;
    for (std::size_t i = 0; i < pq.p.size(); ++i) pq.p[i] = rs.p[i] + step * grad.p[i];
    for (std::size_t i = 0; i < pq.q.size(); ++i) pq.q[i] = rs.q[i] + step * grad.q[i];
    project_unit_ball(pq, nx, ny);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double mom = (t - 1.0) / t_next;
    for (std::size_t i = 0; i < pq.p.size(); ++i) rs.p[i] = pq.p[i] + mom * (pq.p[i] - prev.p[i]);
    for (std::size_t i = 0; i < pq.q.size(); ++i) rs.q[i] = pq.q[i] + mom * (pq.q[i] - prev.q[i]);
    t = t_next;
  }
  apply_l(pq, nx, ny, tmp);
  for (std::size_t i = 0; i < n; ++i) out[i] = v[i] - weight * tmp[i];
}

double operator_norm_squared(const RayProjector& proj, int max_iters, double tol) {
  std::vector<double> v(proj.n_pixels(), 1.0), av(proj.n_rays()), w(proj.n_pixels());
  double norm = std::sqrt(static_cast<double>(v.size()));
  for (double& e : v) e /= norm;
  double lambda = 0.0;
  for (int k = 0; k < max_iters; ++k) {
    proj.forward(v, av);
    proj.back(av, w);
    double wn = 0.0;
    for (double e : w) wn += e * e;
    wn = std::sqrt(wn);
    if (!(wn > 0.0) || !std::isfinite(wn)) throw std::runtime_error("power iteration: degenerate operator");
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = w[i] / wn;
    if (k > 0 && std::abs(wn - lambda) <= tol * wn) return wn;
    lambda = wn;
  }
  throw std::runtime_error("power iteration did not converge in " + std::to_string(max_iters) +
                           " iterations");
}

FistaResult fista_tv(const Sinogram& y, const ImageGrid& grid, const FistaConfig& cfg) {
  cfg.validate();
  y.validate();
  RayProjector proj(grid, y.geometry);
  const int nx = grid.nx, ny = grid.ny;
  const std::size_t n = grid.size();

  FistaResult res;
  // 2% margin over the power-iteration estimate keeps 1/L a valid step.
  res.step = cfg.step ? *cfg.step
                      : 1.0 / (1.02 * operator_norm_squared(proj, cfg.power_max_iters, cfg.power_tol));

  std::vector<double> x(n, 0.0), x_prev(n, 0.0), z(n, 0.0), grad(n), ax(proj.n_rays()), v(n);
  auto objective = [&](const std::vector<double>& img) {
    return half_residual_sq(proj, img, y.values, ax) + cfg.lambda * tv_norm(img, nx, ny);
  };
  res.objective.push_back(objective(x));

  double t = 1.0;
  for (int k = 0; k < cfg.n_iters; ++k) {
    proj.forward(z, ax);
    for (std::size_t i = 0; i < ax.size(); ++i) ax[i] -= y.values[i];
    proj.back(ax, grad);
    for (std::size_t i = 0; i < n; ++i) v[i] = z[i] - res.step * grad[i];
    x_prev.swap(x);
    tv_prox(v, nx, ny, cfg.lambda * res.step, cfg.tv_inner_iters, x);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double mom = (t - 1.0) / t_next;
    for (std::size_t i = 0; i < n; ++i) z[i] = x[i] + mom * (x[i] - x_prev[i]);
    t = t_next;
    res.objective.push_back(objective(x));
    if (!std::isfinite(res.objective.back()))
      throw std::runtime_error("fista: objective became non-finite at iteration " + std::to_string(k));
  }
  res.image = Image(grid, std::move(x));
  return res;
}

std::size_t fista_lambda_search(const Sinogram& y, const Image& truth, FistaConfig cfg,
                                std::span<const double> lambdas, double data_range,
                                std::vector<double>* psnrs) {
  if (lambdas.empty()) throw std::invalid_argument("fista_lambda_search: no candidates");
  if (!cfg.step) {
    RayProjector proj(truth.grid, y.geometry);
    cfg.step = 1.0 / (1.02 * operator_norm_squared(proj, cfg.power_max_iters, cfg.power_tol));
  }
  std::size_t best = 0;
  double best_psnr = -std::numeric_limits<double>::infinity();
  if (psnrs) psnrs->clear();
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    cfg.lambda = lambdas[k];
    const double p = psnr(fista_tv(y, truth.grid, cfg).image, truth, data_range);
    if (psnrs) psnrs->push_back(p);
    if (p > best_psnr) {
      best_psnr = p;
      best = k;
    }
  }
  return best;
}

}  // namespace dosmct
