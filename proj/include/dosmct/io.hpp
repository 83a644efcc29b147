#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dosmct/geometry.hpp"

namespace dosmct {

// Array files are `<base>.f32raw` (raw little-endian float32, row-major) with
// a `<base>.json` sidecar:
//   format "dosmct.f32raw", version 1, dtype "float32", byte_order "little",
//   shape [rows, cols], kind "image" | "sinogram", grid | geometry,
//   geometry_hash, data_hash (FNV-1a 64 of the raw bytes, hex),
//   preview_window [min, max] when a preview was written.
namespace fs = std::filesystem;
using nlohmann::json;

json to_json(const ImageGrid& grid);
json to_json(const FanBeamGeometry& geom);
ImageGrid grid_from_json(const json& j);
FanBeamGeometry geometry_from_json(const json& j);
std::string geometry_hash(const FanBeamGeometry& geom);
std::string grid_hash(const ImageGrid& grid);

fs::path raw_path(const fs::path& base);
fs::path sidecar_path(const fs::path& base);

// `extra` keys are merged into the sidecar.
void write_image(const fs::path& base, const Image& image, const json& extra = json::object());
void write_sinogram(const fs::path& base, const Sinogram& sino,
                    const json& extra = json::object());
Image read_image(const fs::path& base);
Sinogram read_sinogram(const fs::path& base);
json read_sidecar(const fs::path& base);

// 8-bit binary PGM; values are clamped to [lo, hi] and mapped to 0..255.
void write_pgm(const fs::path& path, std::span<const double> values, int width, int height,
               double lo, double hi);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);
json read_json(const fs::path& path);

}  // namespace dosmct
