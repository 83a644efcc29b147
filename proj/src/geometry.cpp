#include "dosmct/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dosmct {

void ImageGrid::validate() const {
  if (nx < 1 || ny < 1) throw std::invalid_argument("image grid: nx and ny must be >= 1");
  if (!(pixel_size > 0.0) || !std::isfinite(pixel_size))
    throw std::invalid_argument("image grid: pixel_size must be positive");
  if (!std::isfinite(center_x) || !std::isfinite(center_y))
    throw std::invalid_argument("image grid: centre offset must be finite");
}

Image::Image(const ImageGrid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
  validate();
}

void Image::validate() const {
  grid.validate();
  if (values.size() != grid.size())
    throw std::invalid_argument("image: value count " + std::to_string(values.size()) +
                                " does not match grid " + std::to_string(grid.nx) + "x" +
                                std::to_string(grid.ny));
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]))
      throw std::invalid_argument("image: non-finite value at pixel " + std::to_string(i));
  }
}

void FanBeamGeometry::validate() const {
  if (!(source_to_center > 0.0) || !(center_to_detector > 0.0))
    throw std::invalid_argument("geometry: distances must be positive");
  if (n_detectors < 1) throw std::invalid_argument("geometry: n_detectors must be >= 1");
  if (!(detector_width_total > 0.0))
    throw std::invalid_argument("geometry: detector_width_total must be positive");
  if (view_angles.empty()) throw std::invalid_argument("geometry: view_angles is empty");
  for (double a : view_angles) {
    if (!(a >= 0.0 && a < 2.0 * std::numbers::pi))
      throw std::invalid_argument("geometry: view angle outside [0, 2pi)");
  }
  if (mode == BeamMode::fan && detector == DetectorShape::arc &&
      0.5 * n_detectors * angular_spacing() >= 0.5 * std::numbers::pi)
    throw std::invalid_argument("geometry: fan angle must be below pi");
}

std::vector<double> equispaced_angles(std::size_t n, double span) {
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = span * static_cast<double>(k) / static_cast<double>(n);
  return out;
}

Sinogram::Sinogram(const FanBeamGeometry& g, std::vector<double> v)
    : geometry(g), values(std::move(v)) {
  validate();
}

void Sinogram::validate() const {
  geometry.validate();
  if (values.size() != geometry.n_rays())
    throw std::invalid_argument("sinogram: value count does not match geometry");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]))
      throw std::invalid_argument("sinogram: non-finite value at entry " + std::to_string(i));
  }
}

Ray ray_endpoints(const FanBeamGeometry& geom, std::size_t view, int detector) {
  const double a = geom.view_angles[view];
  const double c = std::cos(a);
  const double s = std::sin(a);
  // Central ray direction (towards the detector) and the counter-clockwise
  // detector axis.
  const double dir_x = -c, dir_y = -s;
  const double u_x = s, u_y = -c;
  const double offset = geom.element_offset(detector);
  const double sod = geom.source_to_center;
  const double odd = geom.center_to_detector;

  if (geom.mode == BeamMode::parallel) {
    const double t = offset * geom.detector_spacing();
    return {t * u_x + sod * c, t * u_y + sod * s, t * u_x - odd * c, t * u_y - odd * s};
  }

  const double sx = sod * c, sy = sod * s;
  const double sdd = geom.source_to_detector();
  if (geom.detector == DetectorShape::arc) {
    const double gamma = offset * geom.angular_spacing();
    const double cg = std::cos(gamma), sg = std::sin(gamma);
    // Rotate the central direction counter-clockwise by gamma.
    const double rx = dir_x * cg - dir_y * sg;
    const double ry = dir_x * sg + dir_y * cg;
    return {sx, sy, sx + sdd * rx, sy + sdd * ry};
  }
  const double u = offset * geom.detector_spacing();
  return {sx, sy, sx + sdd * dir_x + u * u_x, sy + sdd * dir_y + u * u_y};
}

std::string to_string(BeamMode mode) { return mode == BeamMode::fan ? "fan" : "parallel"; }
std::string to_string(DetectorShape shape) { return shape == DetectorShape::arc ? "arc" : "flat"; }

BeamMode beam_mode_from_string(const std::string& s) {
  if (s == "fan") return BeamMode::fan;
  if (s == "parallel") return BeamMode::parallel;
  throw std::invalid_argument("unknown beam mode '" + s + "'");
}

DetectorShape detector_shape_from_string(const std::string& s) {
  if (s == "arc") return DetectorShape::arc;
  if (s == "flat") return DetectorShape::flat;
  throw std::invalid_argument("unknown detector shape '" + s + "'");
}

}  // namespace dosmct
