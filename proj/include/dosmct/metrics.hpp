#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dosmct/geometry.hpp"

namespace dosmct {

// Returned by psnr() when the images are identical.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

// 10 log10(range^2 / MSE).
double psnr(const Image& a, const Image& b, double data_range);

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

// Mean local SSIM over every position where the Gaussian window fits
// entirely inside the image.
double ssim(const Image& a, const Image& b, double data_range, const SsimParams& params = {});

struct MetricReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double data_range = 0.0;
  SsimParams window;
};

// data_range defaults to max - min of the reference.
MetricReport evaluate(const Image& recon, const Image& reference,
                      std::optional<double> data_range = std::nullopt);
double value_range(const Image& img);

enum class LineAxis { row, col };

std::vector<double> profile(const Image& img, LineAxis axis, int index);
// "position,value" rows with a header; values printed with round-trip
// precision.
std::string profile_csv(const std::vector<double>& values);
std::vector<double> parse_profile_csv(const std::string& text);

}  // namespace dosmct
