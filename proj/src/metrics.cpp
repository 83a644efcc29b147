#include "dosmct/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace dosmct {

namespace {

void require_same_shape(const Image& a, const Image& b) {
  if (a.grid.nx != b.grid.nx || a.grid.ny != b.grid.ny || a.values.size() != b.values.size())
    throw std::invalid_argument("metrics: image shapes differ");
}

// 'valid' separable filtering: out is (ny - w + 1) x (nx - w + 1).
std::vector<double> filter_valid(const std::vector<double>& in, int nx, int ny,
                                 const std::vector<double>& k) {
  const int w = static_cast<int>(k.size());
  const int ox = nx - w + 1, oy = ny - w + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ny) * ox);
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < ox; ++x) {
      double s = 0.0;
      for (int t = 0; t < w; ++t) s += k[t] * in[static_cast<std::size_t>(y) * nx + x + t];
      tmp[static_cast<std::size_t>(y) * ox + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(oy) * ox);
  for (int y = 0; y < oy; ++y)
    for (int x = 0; x < ox; ++x) {
      double s = 0.0;
      for (int t = 0; t < w; ++t) s += k[t] * tmp[static_cast<std::size_t>(y + t) * ox + x];
      out[static_cast<std::size_t>(y) * ox + x] = s;
    }
  return out;
}

}  // namespace

double psnr(const Image& a, const Image& b, double data_range) {
  require_same_shape(a, b);
  if (!(data_range > 0.0)) throw std::invalid_argument("psnr: data_range must be positive");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    sse += d * d;
  }
  if (sse == 0.0) return kPsnrIdentical;
  const double mse = sse / static_cast<double>(a.values.size());
  return 10.0 * std::log10(data_range * data_range / mse);
}

double ssim(const Image& a, const Image& b, double data_range, const SsimParams& p) {
  require_same_shape(a, b);
  if (!(data_range > 0.0)) throw std::invalid_argument("ssim: data_range must be positive");
  const int nx = a.grid.nx, ny = a.grid.ny;
  if (nx < p.window || ny < p.window)
    throw std::invalid_argument("ssim: images must be at least " + std::to_string(p.window) + "x" +
                                std::to_string(p.window));
  std::vector<double> k(static_cast<std::size_t>(p.window));
  const double c = 0.5 * (p.window - 1);
  double ksum = 0.0;
  for (int i = 0; i < p.window; ++i) {
    k[i] = std::exp(-0.5 * (i - c) * (i - c) / (p.sigma * p.sigma));
    ksum += k[i];
  }
  for (double& v : k) v /= ksum;

  const std::size_t n = a.values.size();
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a.values[i] * a.values[i];
    bb[i] = b.values[i] * b.values[i];
    ab[i] = a.values[i] * b.values[i];
  }
  const auto mu_a = filter_valid(a.values, nx, ny, k);
  const auto mu_b = filter_valid(b.values, nx, ny, k);
  const auto e_aa = filter_valid(aa, nx, ny, k);
  const auto e_bb = filter_valid(bb, nx, ny, k);
  const auto e_ab = filter_valid(ab, nx, ny, k);

  const double c1 = (p.k1 * data_range) * (p.k1 * data_range);
  const double c2 = (p.k2 * data_range) * (p.k2 * data_range);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double va = e_aa[i] - mu_a[i] * mu_a[i];
    const double vb = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mu_a[i] * mu_b[i];
    const double num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
    const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2);
    total += num / den;
  }
  return total / static_cast<double>(mu_a.size());
}

double value_range(const Image& img) {
  const auto [lo, hi] = std::minmax_element(img.values.begin(), img.values.end());
  return *hi - *lo;
}

MetricReport evaluate(const Image& recon, const Image& reference, std::optional<double> data_range) {
  MetricReport r;
  r.data_range = data_range.value_or(value_range(reference));
  r.psnr = psnr(recon, reference, r.data_range);
  r.ssim = ssim(recon, reference, r.data_range, r.window);
  return r;
}

std::vector<double> profile(const Image& img, LineAxis axis, int index) {
  std::vector<double> out;
  if (axis == LineAxis::row) {
    if (index < 0 || index >= img.grid.ny) throw std::out_of_range("profile: row index out of range");
    for (int x = 0; x < img.grid.nx; ++x) out.push_back(img.at(x, index));
  } else {
    if (index < 0 || index >= img.grid.nx) throw std::out_of_range("profile: column index out of range");
    for (int y = 0; y < img.grid.ny; ++y) out.push_back(img.at(index, y));
  }
  return out;
}

std::string profile_csv(const std::vector<double>& values) {
  std::string out = "position,value\n";
  char buf[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, values[i]);
    out += buf;
  }
  return out;
}

std::vector<double> parse_profile_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);  // header
  std::vector<double> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("profile csv: malformed line");
    out.push_back(std::stod(line.substr(comma + 1)));
  }
  return out;
}

}  // namespace dosmct
