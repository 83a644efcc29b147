#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dosmct/geometry.hpp"

namespace dosmct {

class Rng;

enum class PhantomKind { shepp_logan, ellipse_set, gaussian_blob_field };

// Shape parameters in mm, angle in rad (counter-clockwise). For ellipses the
// value is added inside the boundary; for blobs it is the peak of an
// anisotropic Gaussian with standard deviations (axis_a, axis_b).
struct Ellipse {
  double center_x = 0.0;
  double center_y = 0.0;
  double axis_a = 1.0;
  double axis_b = 1.0;
  double angle = 0.0;
  double amplitude = 1.0;
};

struct PhantomSpec {
  PhantomKind kind = PhantomKind::shepp_logan;
  ImageGrid grid;
  // ellipse_set: the ellipses; gaussian_blob_field: the blobs; shepp_logan:
  // optional override of the built-in table (empty = standard table).
  std::vector<Ellipse> shapes;

  void validate() const;
};

struct NoiseSpec {
  std::string model = "gaussian";
  double sigma = 0.0;  // absolute, sinogram units
  std::uint64_t seed = 0;

  void validate() const;
};

// Modified (high-contrast) Shepp-Logan ellipses scaled to the grid's
// inscribed half-width.
std::vector<Ellipse> shepp_logan_ellipses(const ImageGrid& grid);

// Pixel-centre rasterisation of the spec.
Image make_phantom(const PhantomSpec& spec);

// Random member of the Shepp-Logan family: global scale/rotation/shift,
// per-ellipse jitter and a few extra interior features.
PhantomSpec perturbed_shepp_logan(const ImageGrid& grid, Rng& rng);
// Random ellipse_set with `count` ellipses inside the grid.
PhantomSpec random_ellipse_set(const ImageGrid& grid, Rng& rng, int count);

Sinogram simulate_measurement(const Image& image, const FanBeamGeometry& geom,
                              const NoiseSpec& noise);

// Keeps n_keep equi-angular views, indices floor(k * n_views / n_keep).
std::vector<std::size_t> kept_view_indices(std::size_t n_views, std::size_t n_keep);
Sinogram subsample_views(const Sinogram& sino, std::size_t n_keep);

std::string to_string(PhantomKind kind);
PhantomKind phantom_kind_from_string(const std::string& s);

}  // namespace dosmct
