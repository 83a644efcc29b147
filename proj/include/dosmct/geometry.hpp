#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dosmct {

// Reconstruction domain. Pixels are square; row 0 is the top row (largest y)
// and values are stored row-major.
struct ImageGrid {
  int nx = 0;
  int ny = 0;
  double pixel_size = 1.0;  // mm
  double center_x = 0.0;    // mm, grid centre relative to the rotation axis
  double center_y = 0.0;

  std::size_t size() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
  }
  double x_min() const { return center_x - 0.5 * nx * pixel_size; }
  double x_max() const { return center_x + 0.5 * nx * pixel_size; }
  double y_min() const { return center_y - 0.5 * ny * pixel_size; }
  double y_max() const { return center_y + 0.5 * ny * pixel_size; }
  double pixel_x(int ix) const { return x_min() + (ix + 0.5) * pixel_size; }
  double pixel_y(int iy) const { return y_max() - (iy + 0.5) * pixel_size; }
  std::size_t index(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * static_cast<std::size_t>(nx) +
           static_cast<std::size_t>(ix);
  }

  void validate() const;
  bool operator==(const ImageGrid&) const = default;
};

struct Image {
  ImageGrid grid;
  std::vector<double> values;

  Image() = default;
  explicit Image(const ImageGrid& g) : grid(g), values(g.size(), 0.0) {}
  Image(const ImageGrid& g, std::vector<double> v);

  double& at(int ix, int iy) { return values[grid.index(ix, iy)]; }
  double at(int ix, int iy) const { return values[grid.index(ix, iy)]; }

  // Throws std::invalid_argument on a length mismatch or non-finite value.
  void validate() const;
};

enum class BeamMode { fan, parallel };
enum class DetectorShape { arc, flat };

// Circular scan. The source sits at source_to_center * (cos a, sin a) for view
// angle a. In fan mode detector element k is offset from the central ray by
// (k - (n-1)/2) spacings, measured counter-clockwise; an arc detector is
// equiangular (detector_width_total is its arc length at source_to_detector),
// a flat detector is equispaced. Parallel mode uses the same detector spacing
// with no magnification.
struct FanBeamGeometry {
  double source_to_center = 1500.0;   // mm
  double center_to_detector = 500.0;  // mm
  int n_detectors = 720;
  double detector_width_total = 413.0;  // mm
  std::vector<double> view_angles;      // rad, each in [0, 2pi)
  BeamMode mode = BeamMode::fan;
  DetectorShape detector = DetectorShape::arc;

  std::size_t n_views() const { return view_angles.size(); }
  std::size_t n_rays() const { return n_views() * static_cast<std::size_t>(n_detectors); }
  double source_to_detector() const { return source_to_center + center_to_detector; }
  double detector_spacing() const { return detector_width_total / n_detectors; }
  // Arc detector: angle subtended by one element at the source.
  double angular_spacing() const { return detector_spacing() / source_to_detector(); }
  // Offset of detector element k from the centre, in element units.
  double element_offset(int k) const { return k - 0.5 * (n_detectors - 1); }

  void validate() const;
  bool operator==(const FanBeamGeometry&) const = default;
};

// n angles k * span / n, k = 0..n-1.
std::vector<double> equispaced_angles(std::size_t n, double span);

struct Sinogram {
  FanBeamGeometry geometry;
  std::vector<double> values;  // [view][detector]

  Sinogram() = default;
  explicit Sinogram(const FanBeamGeometry& g) : geometry(g), values(g.n_rays(), 0.0) {}
  Sinogram(const FanBeamGeometry& g, std::vector<double> v);

  std::size_t n_views() const { return geometry.n_views(); }
  int n_detectors() const { return geometry.n_detectors; }
  double at(std::size_t view, int det) const {
    return values[view * static_cast<std::size_t>(geometry.n_detectors) +
                  static_cast<std::size_t>(det)];
  }

  void validate() const;
};

struct Ray {
  double x0, y0;  // source side
  double x1, y1;  // detector side
};

// Segment from the source (or, in parallel mode, the source-side plane) to
// the detector element.
Ray ray_endpoints(const FanBeamGeometry& geom, std::size_t view, int detector);

std::string to_string(BeamMode mode);
std::string to_string(DetectorShape shape);
BeamMode beam_mode_from_string(const std::string& s);
DetectorShape detector_shape_from_string(const std::string& s);

}  // namespace dosmct
