#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dosmct/classical.hpp"
#include "dosmct/denoiser.hpp"
#include "dosmct/dosm.hpp"
#include "dosmct/geometry.hpp"
#include "dosmct/phantoms.hpp"

namespace dosmct {

// Thrown for malformed or invalid run configurations (exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SirtRunConfig {
  int iters = 0;  // 0: match the DOSM budget T * K
};

struct FistaRunConfig {
  FistaConfig fista = [] {
    FistaConfig f;
    f.n_iters = 200;
    return f;
  }();
  // When non-empty and ground truth is available, lambda is chosen from this
  // grid by PSNR; otherwise fista.lambda is used.
  std::vector<double> lambda_grid = {0.01, 0.1, 1.0, 3.0, 10.0, 30.0, 100.0};
};

struct TrainRunConfig {
  DenoiserArch arch{32, {1, 2, 3, 4, 3, 2, 1}, 0.5};
  TrainConfig train{120, 8, 1e-3, 0.9, 0.999, 1e-8, 0, true, 5};
  int n_images = 400;
  std::uint64_t data_seed = 7;
  std::uint64_t init_seed = 3;
  // Training images as f32raw bases; empty means a generated family of
  // perturbed Shepp-Logan phantoms on the run grid.
  std::vector<std::string> images;
};

struct AblateRunConfig {
  std::string axis = "N";
  std::vector<double> values = {1, 3, 5};
};

// Everything a command needs. JSON keys mirror the field names; every key is
// optional and unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  int full_views = 720;
  int views = 23;
  std::string method = "dosm";

  ImageGrid grid{64, 64, 3.2};
  FanBeamGeometry geometry;  // view angles are generated from full_views
  PhantomSpec phantom;
  NoiseSpec noise;
  double data_range = 0.0;  // 0: max - min of the ground truth

  std::string sinogram_input;  // f32raw base; empty: simulate from phantom
  std::string truth_input;     // f32raw base; empty: phantom when simulated

  SirtRunConfig sirt;
  FistaRunConfig fista;
  DosmConfig dosm;
  std::string checkpoint;  // score model for dosm; "zero" selects the zero score
  TrainRunConfig train;
  AblateRunConfig ablate;

  void validate() const;
};

// Command-line values that apply only where the config file is silent.
struct FlagOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> views;
  std::optional<std::string> method;
  std::optional<std::string> axis;
  std::optional<std::vector<double>> values;
  std::optional<std::string> checkpoint;
};

// Parses `j` over the defaults; flags fill keys absent from `j`. Throws
// ConfigError.
RunConfig config_from_json(const nlohmann::json& j, const FlagOverrides& flags = {});
RunConfig load_config(const std::filesystem::path& path, const FlagOverrides& flags = {});
// Fully resolved configuration, suitable for config_from_json.
nlohmann::json to_json(const RunConfig& cfg);
// FNV-1a of the compact resolved JSON, hex.
std::string config_hash(const RunConfig& cfg);

FanBeamGeometry full_geometry(const RunConfig& cfg);
std::vector<Image> training_images(const RunConfig& cfg);

}  // namespace dosmct
