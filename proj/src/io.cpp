#include "dosmct/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dosmct/hash.hpp"

namespace dosmct {

namespace {

std::vector<unsigned char> to_le_bytes(std::span<const double> values) {
  std::vector<unsigned char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float f = static_cast<float>(values[i]);
    std::uint32_t u = std::bit_cast<std::uint32_t>(f);
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<unsigned char>(u >> (8 * b));
  }
  return bytes;
}

std::vector<double> from_le_bytes(const std::vector<unsigned char>& bytes) {
  std::vector<double> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
    out[i] = static_cast<double>(std::bit_cast<float>(u));
  }
  return out;
}

void write_bytes(const fs::path& path, std::span<const unsigned char> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

json array_sidecar(const std::string& kind, std::size_t rows, std::size_t cols,
                   std::span<const unsigned char> bytes) {
  return json{{"format", "dosmct.f32raw"},
              {"version", 1},
              {"dtype", "float32"},
              {"byte_order", "little"},
              {"shape", {rows, cols}},
              {"kind", kind},
              {"data_hash", hex64(fnv1a64(bytes))}};
}

std::vector<double> read_array(const fs::path& base, const json& meta, const std::string& kind) {
  if (meta.value("format", "") != "dosmct.f32raw" || meta.value("dtype", "") != "float32")
    throw std::runtime_error(sidecar_path(base).string() + ": not a dosmct float32 array");
  if (meta.value("kind", "") != kind)
    throw std::runtime_error(sidecar_path(base).string() + ": expected kind " + kind);
  const auto bytes = read_bytes(raw_path(base));
  const std::size_t rows = meta.at("shape").at(0).get<std::size_t>();
  const std::size_t cols = meta.at("shape").at(1).get<std::size_t>();
  if (bytes.size() != rows * cols * 4)
    throw std::runtime_error(raw_path(base).string() + ": size does not match sidecar shape");
  if (meta.contains("data_hash") && meta["data_hash"].get<std::string>() != hex64(fnv1a64(bytes)))
    throw std::runtime_error(raw_path(base).string() + ": data hash mismatch");
  return from_le_bytes(bytes);
}

}  // namespace

json to_json(const ImageGrid& g) {
  return json{{"nx", g.nx},
              {"ny", g.ny},
              {"pixel_size", g.pixel_size},
              {"center_offset", {g.center_x, g.center_y}}};
}

json to_json(const FanBeamGeometry& g) {
  return json{{"source_to_center", g.source_to_center},
              {"center_to_detector", g.center_to_detector},
              {"n_detectors", g.n_detectors},
              {"detector_width_total", g.detector_width_total},
              {"view_angles", g.view_angles},
              {"mode", to_string(g.mode)},
              {"detector_shape", to_string(g.detector)}};
}

ImageGrid grid_from_json(const json& j) {
  ImageGrid g;
  g.nx = j.at("nx").get<int>();
  g.ny = j.at("ny").get<int>();
  g.pixel_size = j.value("pixel_size", 1.0);
  if (j.contains("center_offset")) {
    g.center_x = j["center_offset"].at(0).get<double>();
    g.center_y = j["center_offset"].at(1).get<double>();
  }
  g.validate();
  return g;
}

FanBeamGeometry geometry_from_json(const json& j) {
  FanBeamGeometry g;
  g.source_to_center = j.value("source_to_center", g.source_to_center);
  g.center_to_detector = j.value("center_to_detector", g.center_to_detector);
  g.n_detectors = j.value("n_detectors", g.n_detectors);
  g.detector_width_total = j.value("detector_width_total", g.detector_width_total);
  g.mode = beam_mode_from_string(j.value("mode", std::string("fan")));
  g.detector = detector_shape_from_string(j.value("detector_shape", std::string("arc")));
  if (j.contains("view_angles")) {
    g.view_angles = j["view_angles"].get<std::vector<double>>();
  } else if (j.contains("n_views")) {
    const double span = j.value("angular_span", 2.0 * 3.14159265358979323846);
    g.view_angles = equispaced_angles(j["n_views"].get<std::size_t>(), span);
  }
  g.validate();
  return g;
}

std::string geometry_hash(const FanBeamGeometry& geom) { return hex64(fnv1a64(to_json(geom).dump())); }
std::string grid_hash(const ImageGrid& grid) { return hex64(fnv1a64(to_json(grid).dump())); }

fs::path raw_path(const fs::path& base) {
  fs::path p = base;
  p += ".f32raw";
  return p;
}

fs::path sidecar_path(const fs::path& base) {
  fs::path p = base;
  p += ".json";
  return p;
}

void write_image(const fs::path& base, const Image& image, const json& extra) {
  image.validate();
  const auto bytes = to_le_bytes(image.values);
  json meta = array_sidecar("image", image.grid.ny, image.grid.nx, bytes);
  meta["grid"] = to_json(image.grid);
  meta["geometry_hash"] = grid_hash(image.grid);
  meta.update(extra);
  write_bytes(raw_path(base), bytes);
  write_text(sidecar_path(base), meta.dump(2) + "\n");
}

void write_sinogram(const fs::path& base, const Sinogram& sino, const json& extra) {
  sino.validate();
  const auto bytes = to_le_bytes(sino.values);
  json meta = array_sidecar("sinogram", sino.n_views(), sino.n_detectors(), bytes);
  meta["geometry"] = to_json(sino.geometry);
  meta["geometry_hash"] = geometry_hash(sino.geometry);
  meta.update(extra);
  write_bytes(raw_path(base), bytes);
  write_text(sidecar_path(base), meta.dump(2) + "\n");
}

json read_sidecar(const fs::path& base) { return read_json(sidecar_path(base)); }

Image read_image(const fs::path& base) {
  const json meta = read_sidecar(base);
  const ImageGrid grid = grid_from_json(meta.at("grid"));
  auto values = read_array(base, meta, "image");
  if (values.size() != grid.size()) throw std::runtime_error(base.string() + ": grid/shape mismatch");
  return Image(grid, std::move(values));
}

Sinogram read_sinogram(const fs::path& base) {
  const json meta = read_sidecar(base);
  const FanBeamGeometry geom = geometry_from_json(meta.at("geometry"));
  auto values = read_array(base, meta, "sinogram");
  if (values.size() != geom.n_rays()) throw std::runtime_error(base.string() + ": geometry/shape mismatch");
  return Sinogram(geom, std::move(values));
}

void write_pgm(const fs::path& path, std::span<const double> values, int width, int height,
               double lo, double hi) {
  if (values.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw std::invalid_argument("pgm: size mismatch");
  const std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<unsigned char> bytes(header.begin(), header.end());
  const double span = hi > lo ? hi - lo : 1.0;
  for (double v : values) {
    const double t = std::clamp((v - lo) / span, 0.0, 1.0);
    bytes.push_back(static_cast<unsigned char>(std::lround(255.0 * t)));
  }
  write_bytes(path, bytes);
}

void write_text(const fs::path& path, const std::string& text) {
  write_bytes(path, std::span<const unsigned char>(
                        reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": invalid JSON: " + e.what());
  }
}

}  // namespace dosmct
