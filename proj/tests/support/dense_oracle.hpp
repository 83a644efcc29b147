#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dosmct/geometry.hpp"

namespace dosmct::oracle {

struct Segment {
  double x0, y0, x1, y1;
};

// Ray endpoints straight from the geometry description: source on the circle
// of radius SOD at the view angle, central ray towards the centre, detector
// elements at offsets k - (n-1)/2 measured counter-clockwise.
inline Segment ray(const FanBeamGeometry& g, std::size_t view, int det) {
  const double a = g.view_angles[view];
  const double off = det - 0.5 * (g.n_detectors - 1);
  const double w = g.detector_width_total / g.n_detectors;
  const double sdd = g.source_to_center + g.center_to_detector;
  if (g.mode == BeamMode::parallel) {
    const double t = off * w;
    const double px = t * std::sin(a), py = -t * std::cos(a);
    return {px + g.source_to_center * std::cos(a), py + g.source_to_center * std::sin(a),
            px - g.center_to_detector * std::cos(a), py - g.center_to_detector * std::sin(a)};
  }
  const double sx = g.source_to_center * std::cos(a), sy = g.source_to_center * std::sin(a);
  if (g.detector == DetectorShape::arc) {
    const double phi = a + std::numbers::pi + off * w / sdd;
    return {sx, sy, sx + sdd * std::cos(phi), sy + sdd * std::sin(phi)};
  }
  const double t = off * w;
  return {sx, sy, sx - sdd * std::cos(a) + t * std::sin(a), sy - sdd * std::sin(a) - t * std::cos(a)};
}

// Length of the part of the segment inside [xl, xh] x [yl, yh]
// (Liang-Barsky clipping).
inline double clipped_length(const Segment& s, double xl, double xh, double yl, double yh) {
  const double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {s.x0 - xl, xh - s.x0, s.y0 - yl, yh - s.y0};
  double t0 = 0.0, t1 = 1.0;
  for (int k = 0; k < 4; ++k) {
    if (p[k] == 0.0) {
      if (q[k] < 0.0) return 0.0;
      continue;
    }
    const double r = q[k] / p[k];
    if (p[k] < 0.0)
      t0 = std::max(t0, r);
    else
      t1 = std::min(t1, r);
  }
  return t1 > t0 ? (t1 - t0) * std::hypot(dx, dy) : 0.0;
}

// Explicit system matrix, rows ordered view-major, columns row-major from the
// top-left pixel.
inline Eigen::MatrixXd system_matrix(const ImageGrid& grid, const FanBeamGeometry& g) {
  const int nd = g.n_detectors;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g.view_angles.size()) * nd,
                                            static_cast<Eigen::Index>(grid.nx) * grid.ny);
  const double half = 0.5 * grid.pixel_size;
  const double x_left = grid.center_x - 0.5 * grid.nx * grid.pixel_size;
  const double y_top = grid.center_y + 0.5 * grid.ny * grid.pixel_size;
  for (std::size_t v = 0; v < g.view_angles.size(); ++v)
    for (int d = 0; d < nd; ++d) {
      const Segment s = ray(g, v, d);
      for (int iy = 0; iy < grid.ny; ++iy)
        for (int ix = 0; ix < grid.nx; ++ix) {
          const double cx = x_left + (ix + 0.5) * grid.pixel_size;
          const double cy = y_top - (iy + 0.5) * grid.pixel_size;
          a(static_cast<Eigen::Index>(v) * nd + d, static_cast<Eigen::Index>(iy) * grid.nx + ix) =
              clipped_length(s, cx - half, cx + half, cy - half, cy + half);
        }
    }
  return a;
}

inline Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline double rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

}  // namespace dosmct::oracle
