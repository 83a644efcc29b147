#include <fftw3.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "dosmct/classical.hpp"
#include "dosmct/parallel.hpp"

namespace dosmct {

namespace {

constexpr double kPi = std::numbers::pi;

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Convolves every row of `rows` (n_rows x n) with the symmetric kernel
// k[m], m = -(n-1)..(n-1), by zero-padded FFT.
class RowConvolver {
 public:
  RowConvolver(std::size_t n, const std::vector<double>& kernel_centered)
      : n_(n), pad_(next_pow2(2 * n - 1)), spectrum_(pad_ / 2 + 1) {
    std::vector<double> k(pad_, 0.0);
    for (std::size_t m = 0; m < n; ++m) {
      k[m] = kernel_centered[n - 1 + m];
      if (m > 0) k[pad_ - m] = kernel_centered[n - 1 - m];
    }
    buf_ = fftw_alloc_real(pad_);
    spec_ = fftw_alloc_complex(pad_ / 2 + 1);
    fwd_ = fftw_plan_dft_r2c_1d(static_cast<int>(pad_), buf_, spec_, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_1d(static_cast<int>(pad_), spec_, buf_, FFTW_ESTIMATE);
    std::copy(k.begin(), k.end(), buf_);
    fftw_execute(fwd_);
    for (std::size_t i = 0; i < spectrum_.size(); ++i)
      spectrum_[i] = std::complex<double>(spec_[i][0], spec_[i][1]) / static_cast<double>(pad_);
  }
  ~RowConvolver() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(buf_);
    fftw_free(spec_);
  }
  RowConvolver(const RowConvolver&) = delete;
  RowConvolver& operator=(const RowConvolver&) = delete;

  void apply(std::span<double> row) {
    std::fill(buf_, buf_ + pad_, 0.0);
    std::copy(row.begin(), row.end(), buf_);
    fftw_execute(fwd_);
    for (std::size_t i = 0; i < spectrum_.size(); ++i) {
      const std::complex<double> v = std::complex<double>(spec_[i][0], spec_[i][1]) * spectrum_[i];
      spec_[i][0] = v.real();
      spec_[i][1] = v.imag();
    }
    fftw_execute(inv_);
    std::copy(buf_, buf_ + n_, row.begin());
  }

 private:
  std::size_t n_, pad_;
  std::vector<std::complex<double>> spectrum_;
  double* buf_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan fwd_{}, inv_{};
};

// Ram-Lak kernel sampled at spacing tau, including the tau quadrature factor.
std::vector<double> ramlak_kernel(int n, double tau) {
  std::vector<double> k(2 * n - 1, 0.0);
  for (int m = -(n - 1); m <= n - 1; ++m) {
    double v = 0.0;
    if (m == 0)
      v = 1.0 / (4.0 * tau * tau);
    else if (m % 2 != 0)
      v = -1.0 / (m * m * kPi * kPi * tau * tau);
    k[m + n - 1] = v * tau;
  }
  return k;
}

// Equiangular fan kernel 1/2 (gamma/sin gamma)^2 h(gamma), times alpha.
std::vector<double> equiangular_kernel(int n, double alpha) {
  std::vector<double> k(2 * n - 1, 0.0);
  for (int m = -(n - 1); m <= n - 1; ++m) {
    double v = 0.0;
    if (m == 0) {
      v = 1.0 / (8.0 * alpha * alpha);
    } else if (m % 2 != 0) {
      const double s = std::sin(m * alpha);
      v = -0.5 / (kPi * kPi * s * s);
    }
    k[m + n - 1] = v * alpha;
  }
  return k;
}

double interpolate(std::span<const double> row, double pos) {
  const int n = static_cast<int>(row.size());
  if (!(pos > -1.0 && pos < n)) return 0.0;
  const int i0 = static_cast<int>(std::floor(pos));
  const double t = pos - i0;
  const double a = i0 >= 0 ? row[static_cast<std::size_t>(i0)] : 0.0;
  const double b = i0 + 1 < n ? row[static_cast<std::size_t>(i0 + 1)] : 0.0;
  return (1.0 - t) * a + t * b;
}

}  // namespace

Image fbp(const Sinogram& sino, const ImageGrid& grid) {
  sino.validate();
  grid.validate();
  const FanBeamGeometry& g = sino.geometry;
  const int nd = g.n_detectors;
  if (nd < 2) throw std::invalid_argument("fbp: at least 2 detectors are required");
  const std::size_t nv = g.n_views();
  const double sod = g.source_to_center;
  const bool fan = g.mode == BeamMode::fan;
  const bool arc = g.detector == DetectorShape::arc;

  // Detector sample spacing in the filtering domain.
  double spacing = g.detector_spacing();
  if (fan && arc) spacing = g.angular_spacing();
  if (fan && !arc) spacing = g.detector_spacing() * sod / g.source_to_detector();

  std::vector<double> kernel;
  if (fan && arc) {
    kernel = equiangular_kernel(nd, spacing);
  } else {
    kernel = ramlak_kernel(nd, spacing);
    if (fan)
      for (double& v : kernel) v *= 0.5;
  }

  std::vector<double> filtered = sino.values;
  {
    RowConvolver conv(static_cast<std::size_t>(nd), kernel);
    for (std::size_t v = 0; v < nv; ++v) {
      std::span<double> row(filtered.data() + v * nd, static_cast<std::size_t>(nd));
      if (fan) {
        for (int k = 0; k < nd; ++k) {
          const double off = g.element_offset(k) * spacing;
          row[k] *= arc ? sod * std::cos(off) : sod / std::sqrt(sod * sod + off * off);
        }
      }
      conv.apply(row);
    }
  }

  const double dbeta = fan ? 2.0 * kPi / static_cast<double>(nv) : kPi / static_cast<double>(nv);
  Image out(grid);
  parallel_for(static_cast<std::size_t>(grid.ny), [&](std::size_t iy) {
    const double y = grid.pixel_y(static_cast<int>(iy));
    for (int ix = 0; ix < grid.nx; ++ix) {
      const double x = grid.pixel_x(ix);
      double acc = 0.0;
      for (std::size_t v = 0; v < nv; ++v) {
        const double c = std::cos(g.view_angles[v]), s = std::sin(g.view_angles[v]);
        std::span<const double> row(filtered.data() + v * nd, static_cast<std::size_t>(nd));
        const double center = 0.5 * (nd - 1);
        if (!fan) {
          const double t = x * s - y * c;  // coordinate along the detector axis (s, -c)
          acc += interpolate(row, t / spacing + center);
          continue;
        }
        // Vector from the source to the pixel, split along the central ray
        // (-c, -s) and the detector axis (s, -c).
        const double rx = x - sod * c, ry = y - sod * s;
        const double along = -rx * c - ry * s;
        const double across = rx * s - ry * c;
        if (arc) {
          const double gamma = std::atan2(across, along);
          const double l2 = rx * rx + ry * ry;
          acc += interpolate(row, gamma / spacing + center) / l2;
        } else {
          const double u = along / sod;
          const double pos = sod * across / along;
          acc += interpolate(row, pos / spacing + center) / (u * u);
        }
      }
      out.at(ix, static_cast<int>(iy)) = acc * dbeta;
    }
  });
  return out;
}

}  // namespace dosmct
