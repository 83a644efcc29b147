#pragma once

#include <cstddef>
#include <vector>

#include "dosmct/geometry.hpp"

namespace dosmct {

// N parallel diffusion channels: generative iterates u, data-consistent
// iterates x and the convex weights used to form the x0 estimate.
struct ChannelEnsemble {
  std::vector<Image> x;
  std::vector<Image> u;
  std::vector<double> weights;

  static ChannelEnsemble uniform(const ImageGrid& grid, std::size_t n);

  std::size_t size() const { return x.size(); }
  const ImageGrid& grid() const { return x.front().grid; }
  // Non-empty, shared grid, weights >= 0 summing to 1 (within 1e-12).
  void validate() const;
};

// sum_n w_n x_n, elementwise.
Image weighted_mean(const std::vector<Image>& images, const std::vector<double>& weights);

}  // namespace dosmct
