#include "dosmct/projector.hpp"

#include <stdexcept>
#include <string>

#include "dosmct/parallel.hpp"

namespace dosmct {

namespace {

// Back projection accumulates into a fixed number of view blocks, each with
// its own partial image; blocks are summed in index order so the result does
// not depend on the worker count.
constexpr std::size_t kBackBlocks = 8;

// Upper bound on the estimated number of stored matrix entries.
constexpr double kCacheEntries = 8e6;

}  // namespace

RayProjector::RayProjector(const ImageGrid& grid, const FanBeamGeometry& geom)
    : grid_(grid), geom_(geom) {
  grid_.validate();
  geom_.validate();
  rays_.reserve(geom_.n_rays());
  for (std::size_t v = 0; v < geom_.n_views(); ++v)
    for (int d = 0; d < geom_.n_detectors; ++d) rays_.push_back(ray_endpoints(geom_, v, d));

  const double estimate = static_cast<double>(rays_.size()) * (grid_.nx + grid_.ny);
  if (estimate > kCacheEntries) return;
  row_ptr_.reserve(rays_.size() + 1);
  row_ptr_.push_back(0);
  for (std::size_t ray = 0; ray < rays_.size(); ++ray) {
    trace(ray, [&](std::size_t j, double h) {
      cols_.push_back(static_cast<std::uint32_t>(j));
      vals_.push_back(h);
    });
    row_ptr_.push_back(cols_.size());
  }
}

void RayProjector::forward(std::span<const double> image, std::span<double> sino) const {
  if (image.size() != n_pixels()) throw std::invalid_argument("forward: image size mismatch");
  if (sino.size() != n_rays()) throw std::invalid_argument("forward: sinogram size mismatch");
  const std::size_t nd = static_cast<std::size_t>(geom_.n_detectors);
  parallel_for(geom_.n_views(), [&](std::size_t v) {
    for (std::size_t d = 0; d < nd; ++d) {
      const std::size_t ray = v * nd + d;
      double sum = 0.0;
      row(ray, [&](std::size_t j, double h) { sum += h * image[j]; });
      sino[ray] = sum;
    }
  });
}

void RayProjector::back(std::span<const double> sino, std::span<double> image) const {
  if (image.size() != n_pixels()) throw std::invalid_argument("back: image size mismatch");
  if (sino.size() != n_rays()) throw std::invalid_argument("back: sinogram size mismatch");
  const std::size_t nv = geom_.n_views();
  const std::size_t nd = static_cast<std::size_t>(geom_.n_detectors);
  const std::size_t blocks = std::min(kBackBlocks, nv);
  std::vector<std::vector<double>> partial(blocks, std::vector<double>(n_pixels(), 0.0));
  parallel_for(blocks, [&](std::size_t b) {
    std::vector<double>& acc = partial[b];
    for (std::size_t v = nv * b / blocks; v < nv * (b + 1) / blocks; ++v) {
      for (std::size_t d = 0; d < nd; ++d) {
        const std::size_t ray = v * nd + d;
        const double value = sino[ray];
        if (value == 0.0) continue;
        row(ray, [&](std::size_t j, double h) { acc[j] += h * value; });
      }
    }
  });
  std::fill(image.begin(), image.end(), 0.0);
  for (const auto& acc : partial)
    for (std::size_t j = 0; j < image.size(); ++j) image[j] += acc[j];
}

Sinogram forward_project(const Image& image, const FanBeamGeometry& geom) {
  image.validate();
  RayProjector proj(image.grid, geom);
  Sinogram out(geom);
  proj.forward(image.values, out.values);
  return out;
}

Image back_project(const Sinogram& sino, const ImageGrid& grid) {
  sino.validate();
  RayProjector proj(grid, sino.geometry);
  Image out(grid);
  proj.back(sino.values, out.values);
  return out;
}

double sirt_guard(const ImageGrid& grid) { return 1e-12 * grid.pixel_size; }

SirtWeights sirt_weights(const RayProjector& projector) {
  const double guard = sirt_guard(projector.grid());
  SirtWeights w;
  w.row_inv.assign(projector.n_rays(), 0.0);
  w.col_inv.assign(projector.n_pixels(), 0.0);
  const std::vector<double> ones_image(projector.n_pixels(), 1.0);
  const std::vector<double> ones_sino(projector.n_rays(), 1.0);
  projector.forward(ones_image, w.row_inv);
  projector.back(ones_sino, w.col_inv);
  for (double& v : w.row_inv) v = v > guard ? 1.0 / v : 0.0;
  for (double& v : w.col_inv) v = v > guard ? 1.0 / v : 0.0;
  return w;
}

SirtWeights sirt_weights(const FanBeamGeometry& geom, const ImageGrid& grid) {
  return sirt_weights(RayProjector(grid, geom));
}

}  // namespace dosmct
