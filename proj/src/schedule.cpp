#include <cmath>
#include <stdexcept>
#include <string>

#include "dosmct/score.hpp"

namespace dosmct {

void NoiseSchedule::validate() const {
  if (!(sigma_min > 0.0)) throw std::invalid_argument("schedule: sigma_min must be positive");
  if (!(sigma_max > sigma_min)) throw std::invalid_argument("schedule: sigma_max must exceed sigma_min");
  if (n_steps < 2) throw std::invalid_argument("schedule: at least 2 steps are required");
}

double NoiseSchedule::sigma(std::size_t i) const { return sigma_at(*this, i); }

double sigma_at(const NoiseSchedule& s, std::size_t i) {
  if (i >= static_cast<std::size_t>(s.n_steps))
    throw std::out_of_range("schedule: step " + std::to_string(i) + " outside [0, " +
                            std::to_string(s.n_steps) + ")");
  const std::size_t last = static_cast<std::size_t>(s.n_steps - 1);
  if (i == 0) return s.sigma_min;
  if (i == last) return s.sigma_max;
  const double frac = static_cast<double>(i) / static_cast<double>(last);
  return s.sigma_min * std::pow(s.sigma_max / s.sigma_min, frac);
}

}  // namespace dosmct
