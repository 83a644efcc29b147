#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace dosmct {

// Named, versioned generator. mt19937_64 is bit-exact across standard
// libraries; the uniform and normal transforms are implemented here because
// std::normal_distribution is not.
class Rng {
 public:
  static constexpr std::string_view kName = "mt19937_64+box-muller/v1";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double normal();
  void fill_normal(std::span<double> out);
  // Integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// SplitMix64 finaliser over (master, stream); used to derive independent
// per-channel and per-run streams from one master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace dosmct
