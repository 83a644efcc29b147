#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "dosmct/geometry.hpp"

namespace dosmct {

// Per-ray and per-pixel reciprocals of the system-matrix row and column sums.
// Entries whose sum does not exceed the guard threshold are zero.
struct SirtWeights {
  std::vector<double> row_inv;  // length n_rays
  std::vector<double> col_inv;  // length n_pixels
};

// Matrix-free system matrix A for one (grid, geometry) pair. Each entry h_ij is
// the exact intersection length (mm) of ray i with pixel j, found by an
// incremental Siddon traversal. back() replays the same traversal, so it is
// the exact transpose of forward().
class RayProjector {
 public:
  RayProjector(const ImageGrid& grid, const FanBeamGeometry& geom);

  const ImageGrid& grid() const { return grid_; }
  const FanBeamGeometry& geometry() const { return geom_; }
  std::size_t n_rays() const { return geom_.n_rays(); }
  std::size_t n_pixels() const { return grid_.size(); }

  void forward(std::span<const double> image, std::span<double> sino) const;
  void back(std::span<const double> sino, std::span<double> image) const;

  // Calls visit(pixel_index, length_mm) for every pixel crossed by the ray,
  // in traversal order.
  template <class Visit>
  void trace(std::size_t ray, Visit&& visit) const;

  // True when the traversal results are stored as a sparse matrix (small
  // problems); results are identical either way.
  bool cached() const { return !row_ptr_.empty(); }

 private:
  template <class Visit>
  void row(std::size_t ray, Visit&& visit) const {
    if (row_ptr_.empty()) {
      trace(ray, visit);
      return;
    }
    for (std::size_t k = row_ptr_[ray]; k < row_ptr_[ray + 1]; ++k) visit(cols_[k], vals_[k]);
  }

  ImageGrid grid_;
  FanBeamGeometry geom_;
  std::vector<Ray> rays_;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::uint32_t> cols_;
  std::vector<double> vals_;
};

Sinogram forward_project(const Image& image, const FanBeamGeometry& geom);
Image back_project(const Sinogram& sino, const ImageGrid& grid);

// Guard threshold for zero row/column sums.
double sirt_guard(const ImageGrid& grid);
SirtWeights sirt_weights(const FanBeamGeometry& geom, const ImageGrid& grid);
SirtWeights sirt_weights(const RayProjector& projector);

// ---------------------------------------------------------------------------

template <class Visit>
void RayProjector::trace(std::size_t ray, Visit&& visit) const {
  const Ray& r = rays_[ray];
  const double dx = r.x1 - r.x0;
  const double dy = r.y1 - r.y0;
  const double len = std::sqrt(dx * dx + dy * dy);
  const double p = grid_.pixel_size;
  const double xmin = grid_.x_min(), xmax = grid_.x_max();
  const double ymin = grid_.y_min(), ymax = grid_.y_max();
  const double flat = 1e-14 * len;

  double a_lo = 0.0, a_hi = 1.0;
  if (std::abs(dx) <= flat) {
    if (!(r.x0 >= xmin && r.x0 < xmax)) return;
  } else {
    double a0 = (xmin - r.x0) / dx, a1 = (xmax - r.x0) / dx;
    if (a0 > a1) std::swap(a0, a1);
    a_lo = std::max(a_lo, a0);
    a_hi = std::min(a_hi, a1);
  }
  if (std::abs(dy) <= flat) {
    if (!(r.y0 >= ymin && r.y0 < ymax)) return;
  } else {
    double a0 = (ymin - r.y0) / dy, a1 = (ymax - r.y0) / dy;
    if (a0 > a1) std::swap(a0, a1);
    a_lo = std::max(a_lo, a0);
    a_hi = std::min(a_hi, a1);
  }
  if (!(a_hi > a_lo)) return;

  const bool step_x = std::abs(dx) > flat;
  const bool step_y = std::abs(dy) > flat;
  const int sx = dx > 0 ? 1 : -1;
  const int sy = dy > 0 ? 1 : -1;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // First crossing strictly after entry, per axis, then locate the starting
  // pixel from the midpoint of the first segment.
  const double tol = 1e-12 * (a_hi - a_lo);
  auto first_crossing = [&](double p0, double d, double lo, bool moving) {
    if (!moving) return kInf;
    const double pos = (p0 + a_lo * d - lo) / p;
    double k = d > 0 ? std::floor(pos) + 1.0 : std::ceil(pos) - 1.0;
    double a = (lo + k * p - p0) / d;
    if (a <= a_lo + tol) {
      k += d > 0 ? 1.0 : -1.0;
      a = (lo + k * p - p0) / d;
    }
    return a;
  };
  const double first = std::min({first_crossing(r.x0, dx, xmin, step_x),
                                 first_crossing(r.y0, dy, ymin, step_y), a_hi});
  const double a_mid = 0.5 * (a_lo + first);
  int ix = static_cast<int>(std::floor((r.x0 + a_mid * dx - xmin) / p));
  int jy = static_cast<int>(std::floor((r.y0 + a_mid * dy - ymin) / p));  // from bottom
  ix = std::clamp(ix, 0, grid_.nx - 1);
  jy = std::clamp(jy, 0, grid_.ny - 1);

  const double inv_dx = step_x ? 1.0 / dx : 0.0;
  const double inv_dy = step_y ? 1.0 / dy : 0.0;
  const int x_plane_shift = sx > 0 ? 1 : 0;
  const int y_plane_shift = sy > 0 ? 1 : 0;

  double a = a_lo;
  for (;;) {
    const double ax = step_x ? (xmin + (ix + x_plane_shift) * p - r.x0) * inv_dx : kInf;
    const double ay = step_y ? (ymin + (jy + y_plane_shift) * p - r.y0) * inv_dy : kInf;
    const double an = std::min({ax, ay, a_hi});
    if (an > a) {
      visit(static_cast<std::size_t>(grid_.ny - 1 - jy) * static_cast<std::size_t>(grid_.nx) +
                static_cast<std::size_t>(ix),
            (an - a) * len);
      a = an;
    }
    if (an >= a_hi) break;
    if (ax <= ay) ix += sx;
    if (ay <= ax) jy += sy;
    if (ix < 0 || ix >= grid_.nx || jy < 0 || jy >= grid_.ny) break;
  }
}

}  // namespace dosmct
