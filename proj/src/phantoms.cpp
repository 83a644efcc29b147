#include "dosmct/phantoms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dosmct/projector.hpp"
#include "dosmct/rng.hpp"

namespace dosmct {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct UnitEllipse {
  double amplitude, a, b, x0, y0, angle;
};

// Toft's modified Shepp-Logan, unit-square coordinates.
constexpr UnitEllipse kSheppLogan[] = {
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
    {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0 * kDeg},
    {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0 * kDeg},
    {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
    {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
    {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
    {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
};

double half_width(const ImageGrid& grid) {
  return 0.5 * std::min(grid.nx, grid.ny) * grid.pixel_size;
}

// Squared normalised radius of (x, y) in the shape's frame.
double shape_radius2(const Ellipse& e, double x, double y) {
  const double dx = x - e.center_x, dy = y - e.center_y;
  const double c = std::cos(e.angle), s = std::sin(e.angle);
  const double u = (dx * c + dy * s) / e.axis_a;
  const double v = (-dx * s + dy * c) / e.axis_b;
  return u * u + v * v;
}

}  // namespace

void PhantomSpec::validate() const {
  grid.validate();
  if (grid.nx < 8 || grid.ny < 8) throw std::invalid_argument("phantom: size must be at least 8x8");
  for (const auto& e : shapes) {
    if (!std::isfinite(e.amplitude) || !std::isfinite(e.center_x) || !std::isfinite(e.center_y) ||
        !std::isfinite(e.angle))
      throw std::invalid_argument("phantom: shape parameters must be finite");
    if (!(e.axis_a > 0.0) || !(e.axis_b > 0.0))
      throw std::invalid_argument("phantom: shape axes must be positive");
  }
}

void NoiseSpec::validate() const {
  if (model != "gaussian") throw std::invalid_argument("noise: unknown model '" + model + "'");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("noise: sigma must be >= 0");
}

std::vector<Ellipse> shepp_logan_ellipses(const ImageGrid& grid) {
  const double h = half_width(grid);
  std::vector<Ellipse> out;
  for (const auto& u : kSheppLogan)
    out.push_back({grid.center_x + u.x0 * h, grid.center_y + u.y0 * h, u.a * h, u.b * h, u.angle,
                   u.amplitude});
  return out;
}

Image make_phantom(const PhantomSpec& spec) {
  spec.validate();
  std::vector<Ellipse> shapes = spec.shapes;
  if (spec.kind == PhantomKind::shepp_logan && shapes.empty())
    shapes = shepp_logan_ellipses(spec.grid);
  const bool blobs = spec.kind == PhantomKind::gaussian_blob_field;

  Image img(spec.grid);
  for (int iy = 0; iy < spec.grid.ny; ++iy) {
    const double y = spec.grid.pixel_y(iy);
    for (int ix = 0; ix < spec.grid.nx; ++ix) {
      const double x = spec.grid.pixel_x(ix);
      double v = 0.0;
      for (const auto& e : shapes) {
        const double r2 = shape_radius2(e, x, y);
        if (blobs)
          v += e.amplitude * std::exp(-0.5 * r2);
        else if (r2 <= 1.0)
          v += e.amplitude;
      }
      img.at(ix, iy) = v;
    }
  }
  return img;
}

PhantomSpec perturbed_shepp_logan(const ImageGrid& grid, Rng& rng) {
  const double h = half_width(grid);
  auto sym = [&](double w) { return w * (2.0 * rng.uniform() - 1.0); };

  const double scale = 0.85 + 0.2 * rng.uniform();
  const double rot = sym(0.35);
  const double shift_x = sym(0.04) * h, shift_y = sym(0.04) * h;
  const double cr = std::cos(rot), sr = std::sin(rot);

  PhantomSpec spec;
  spec.kind = PhantomKind::ellipse_set;
  spec.grid = grid;
  for (std::size_t k = 0; k < std::size(kSheppLogan); ++k) {
    const UnitEllipse& u = kSheppLogan[k];
    const bool outer = k < 2;
    double x0 = u.x0, y0 = u.y0, a = u.a, b = u.b, amp = u.amplitude;
    if (!outer) {
      x0 += sym(0.04);
      y0 += sym(0.04);
      a *= 1.0 + sym(0.25);
      b *= 1.0 + sym(0.25);
      amp *= 1.0 + sym(0.5);
    } else {
      a *= 1.0 + sym(0.05);
      b *= 1.0 + sym(0.05);
    }
    const double angle = u.angle + (outer ? 0.0 : sym(0.3)) + rot;
    const double px = scale * (cr * x0 - sr * y0) * h;
    const double py = scale * (sr * x0 + cr * y0) * h;
    spec.shapes.push_back({grid.center_x + shift_x + px, grid.center_y + shift_y + py,
                           scale * a * h, scale * b * h, angle, amp});
  }
  // Extra interior features inside the brain ellipse.
  const int extra = static_cast<int>(rng.below(4));
  for (int k = 0; k < extra; ++k) {
    const double rr = 0.45 * std::sqrt(rng.uniform());
    const double th = 2.0 * std::numbers::pi * rng.uniform();
    const double amp = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.05 + 0.15 * rng.uniform());
    spec.shapes.push_back({grid.center_x + shift_x + scale * rr * std::cos(th) * h,
                           grid.center_y + shift_y + scale * rr * std::sin(th) * h * 1.2,
                           (0.03 + 0.1 * rng.uniform()) * scale * h,
                           (0.03 + 0.1 * rng.uniform()) * scale * h,
                           std::numbers::pi * rng.uniform(), amp});
  }
  return spec;
}

PhantomSpec random_ellipse_set(const ImageGrid& grid, Rng& rng, int count) {
  const double h = half_width(grid);
  PhantomSpec spec;
  spec.kind = PhantomKind::ellipse_set;
  spec.grid = grid;
  for (int k = 0; k < count; ++k) {
    const double a = (0.1 + 0.4 * rng.uniform()) * h;
    const double b = (0.1 + 0.4 * rng.uniform()) * h;
    const double cx = grid.center_x + (2.0 * rng.uniform() - 1.0) * (h - std::max(a, b));
    const double cy = grid.center_y + (2.0 * rng.uniform() - 1.0) * (h - std::max(a, b));
    spec.shapes.push_back({cx, cy, a, b, std::numbers::pi * rng.uniform(),
                           0.1 + 0.9 * rng.uniform()});
  }
  return spec;
}

Sinogram simulate_measurement(const Image& image, const FanBeamGeometry& geom,
                              const NoiseSpec& noise) {
  noise.validate();
  Sinogram sino = forward_project(image, geom);
  if (noise.sigma > 0.0) {
    Rng rng(noise.seed);
    for (double& v : sino.values) v += noise.sigma * rng.normal();
  }
  return sino;
}

std::vector<std::size_t> kept_view_indices(std::size_t n_views, std::size_t n_keep) {
  if (n_keep < 1 || n_keep > n_views)
    throw std::invalid_argument("subsample: n_keep must be in [1, " + std::to_string(n_views) + "]");
  std::vector<std::size_t> idx(n_keep);
  for (std::size_t k = 0; k < n_keep; ++k) idx[k] = k * n_views / n_keep;
  return idx;
}

Sinogram subsample_views(const Sinogram& sino, std::size_t n_keep) {
  const auto idx = kept_view_indices(sino.n_views(), n_keep);
  FanBeamGeometry g = sino.geometry;
  g.view_angles.clear();
  const std::size_t nd = static_cast<std::size_t>(sino.n_detectors());
  std::vector<double> values;
  values.reserve(n_keep * nd);
  for (std::size_t v : idx) {
    g.view_angles.push_back(sino.geometry.view_angles[v]);
    values.insert(values.end(), sino.values.begin() + static_cast<std::ptrdiff_t>(v * nd),
                  sino.values.begin() + static_cast<std::ptrdiff_t>((v + 1) * nd));
  }
  return Sinogram(g, std::move(values));
}

std::string to_string(PhantomKind kind) {
  switch (kind) {
    case PhantomKind::shepp_logan: return "shepp_logan";
    case PhantomKind::ellipse_set: return "ellipse_set";
    case PhantomKind::gaussian_blob_field: return "gaussian_blob_field";
  }
  return "?";
}

PhantomKind phantom_kind_from_string(const std::string& s) {
  if (s == "shepp_logan") return PhantomKind::shepp_logan;
  if (s == "ellipse_set") return PhantomKind::ellipse_set;
  if (s == "gaussian_blob_field") return PhantomKind::gaussian_blob_field;
  throw std::invalid_argument("unknown phantom kind '" + s + "'");
}

}  // namespace dosmct
