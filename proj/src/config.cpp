#include "dosmct/config.hpp"

#include <functional>
#include <map>
#include <numbers>

#include "dosmct/hash.hpp"
#include "dosmct/io.hpp"
#include "dosmct/rng.hpp"

namespace dosmct {

namespace {

using nlohmann::json;
using Handler = std::function<void(const json&)>;

// Applies one handler per key; unknown keys are errors.
void read_object(const json& j, const std::string& where, const std::map<std::string, Handler>& keys) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    const auto it = keys.find(key);
    if (it == keys.end()) throw ConfigError(where + ": unknown key \"" + key + "\"");
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw ConfigError(where + "." + key + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + "." + key + ": " + e.what());
    }
  }
}

template <class T>
Handler set(T& field) {
  return [&field](const json& v) { field = v.get<T>(); };
}

json shape_to_json(const Ellipse& e) {
  return json{{"center", {e.center_x, e.center_y}},
              {"axes", {e.axis_a, e.axis_b}},
              {"angle", e.angle},
              {"amplitude", e.amplitude}};
}

Ellipse shape_from_json(const json& j) {
  Ellipse e;
  read_object(j, "phantom.shapes[]",
              {{"center",
                [&](const json& v) {
                  e.center_x = v.at(0).get<double>();
                  e.center_y = v.at(1).get<double>();
                }},
               {"axes",
                [&](const json& v) {
                  e.axis_a = v.at(0).get<double>();
                  e.axis_b = v.at(1).get<double>();
                }},
               {"angle", set(e.angle)},
               {"amplitude", set(e.amplitude)}});
  return e;
}

json schedule_to_json(const NoiseSchedule& s) {
  return json{{"sigma_min", s.sigma_min}, {"sigma_max", s.sigma_max}, {"n_steps", s.n_steps}};
}

void read_schedule(const json& j, NoiseSchedule& s) {
  read_object(j, "dosm.schedule",
              {{"sigma_min", set(s.sigma_min)}, {"sigma_max", set(s.sigma_max)}, {"n_steps", set(s.n_steps)}});
}

}  // namespace

void RunConfig::validate() const {
  try {
    grid.validate();
    if (full_views < 1) throw std::invalid_argument("full_views must be >= 1");
    if (views < 1 || views > full_views)
      throw std::invalid_argument("views must be in [1, full_views]");
    if (method != "fbp" && method != "sirt" && method != "fista" && method != "dosm")
      throw std::invalid_argument("method must be fbp|sirt|fista|dosm, got \"" + method + "\"");
    full_geometry(*this).validate();
    PhantomSpec p = phantom;
    p.grid = grid;
    p.validate();
    noise.validate();
    if (!(data_range >= 0.0)) throw std::invalid_argument("data_range must be >= 0");
    if (sirt.iters < 0) throw std::invalid_argument("sirt.iters must be >= 0");
    fista.fista.validate();
    dosm.validate();
    train.arch.validate();
    train.train.validate();
    if (train.images.empty() && train.n_images < 1)
      throw std::invalid_argument("train.n_images must be >= 1");
    if (ablate.axis != "N" && ablate.axis != "K" && ablate.axis != "beta")
      throw std::invalid_argument("ablate.axis must be N|K|beta");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig config_from_json(const json& j, const FlagOverrides& flags) {
  RunConfig c;
  if (flags.seed) c.seed = *flags.seed;
  if (flags.views) c.views = *flags.views;
  if (flags.method) c.method = *flags.method;
  if (flags.axis) c.ablate.axis = *flags.axis;
  if (flags.values) c.ablate.values = *flags.values;
  if (flags.checkpoint) c.checkpoint = *flags.checkpoint;
  bool dosm_seed_set = false;

  read_object(
      j, "config",
      {{"seed", set(c.seed)},
       {"full_views", set(c.full_views)},
       {"views", set(c.views)},
       {"method", set(c.method)},
       {"grid", [&](const json& v) { c.grid = grid_from_json(v); }},
       {"geometry",
        [&](const json& v) {
          read_object(v, "geometry",
                      {{"source_to_center", set(c.geometry.source_to_center)},
                       {"center_to_detector", set(c.geometry.center_to_detector)},
                       {"n_detectors", set(c.geometry.n_detectors)},
                       {"detector_width_total", set(c.geometry.detector_width_total)},
                       {"mode", [&](const json& m) { c.geometry.mode = beam_mode_from_string(m.get<std::string>()); }},
                       {"detector_shape", [&](const json& m) {
                          c.geometry.detector = detector_shape_from_string(m.get<std::string>());
                        }}});
        }},
       {"phantom",
        [&](const json& v) {
          read_object(v, "phantom",
                      {{"kind", [&](const json& k) { c.phantom.kind = phantom_kind_from_string(k.get<std::string>()); }},
                       {"shapes", [&](const json& s) {
                          c.phantom.shapes.clear();
                          for (const auto& e : s) c.phantom.shapes.push_back(shape_from_json(e));
                        }}});
        }},
       {"noise",
        [&](const json& v) {
          read_object(v, "noise",
                      {{"model", set(c.noise.model)}, {"sigma", set(c.noise.sigma)}, {"seed", set(c.noise.seed)}});
        }},
       {"data_range", set(c.data_range)},
       {"inputs",
        [&](const json& v) {
          read_object(v, "inputs", {{"sinogram", set(c.sinogram_input)}, {"truth", set(c.truth_input)}});
        }},
       {"sirt", [&](const json& v) { read_object(v, "sirt", {{"iters", set(c.sirt.iters)}}); }},
       {"fista",
        [&](const json& v) {
          auto& f = c.fista.fista;
          read_object(v, "fista",
                      {{"lambda", set(f.lambda)},
                       {"iters", set(f.n_iters)},
                       {"step", [&](const json& s) {
                          if (s.is_string() && s.get<std::string>() == "auto")
                            f.step.reset();
                          else
                            f.step = s.get<double>();
                        }},
                       {"tv_inner_iters", set(f.tv_inner_iters)},
                       {"lambda_grid", set(c.fista.lambda_grid)}});
        }},
       {"dosm",
        [&](const json& v) {
          auto& d = c.dosm;
          read_object(v, "dosm",
                      {{"n_channels", set(d.n_channels)},
                       {"dc_inner_iters", set(d.dc_inner_iters)},
                       {"beta", set(d.beta)},
                       {"corrector_snr", set(d.corrector_snr)},
                       {"n_corrector_steps", set(d.n_corrector_steps)},
                       {"weights_mode", set(d.weights_mode)},
                       {"seed", [&](const json& s) {
                          d.seed = s.get<std::uint64_t>();
                          dosm_seed_set = true;
                        }},
                       {"schedule", [&](const json& s) { read_schedule(s, d.schedule); }},
                       {"coupling", [&](const json& s) { d.coupling = coupling_from_string(s.get<std::string>()); }},
                       {"dc_start", [&](const json& s) { d.dc_start = dc_start_from_string(s.get<std::string>()); }},
                       {"dc_residual",
                        [&](const json& s) { d.dc_residual = dc_residual_from_string(s.get<std::string>()); }},
                       {"order", [&](const json& s) { d.order = loop_order_from_string(s.get<std::string>()); }},
                       {"inject_noise", set(d.inject_noise)},
                       {"checkpoint", set(c.checkpoint)}});
        }},
       {"train",
        [&](const json& v) {
          auto& t = c.train;
          read_object(
              v, "train",
              {{"hidden_channels", set(t.arch.hidden_channels)},
               {"dilations", set(t.arch.dilations)},
               {"sigma_data", set(t.arch.sigma_data)},
               {"epochs", set(t.train.epochs)},
               {"batch_size", set(t.train.batch_size)},
               {"learning_rate", set(t.train.learning_rate)},
               {"adam_beta1", set(t.train.adam_beta1)},
               {"adam_beta2", set(t.train.adam_beta2)},
               {"adam_eps", set(t.train.adam_eps)},
               {"crop", set(t.train.crop)},
               {"flips", set(t.train.flips)},
               {"seed", set(t.train.seed)},
               {"n_images", set(t.n_images)},
               {"data_seed", set(t.data_seed)},
               {"init_seed", set(t.init_seed)},
               {"images", set(t.images)}});
        }},
       {"ablate",
        [&](const json& v) {
          read_object(v, "ablate", {{"axis", set(c.ablate.axis)}, {"values", set(c.ablate.values)}});
        }}});

  if (!dosm_seed_set) c.dosm.seed = c.seed;
  c.phantom.grid = c.grid;
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path, const FlagOverrides& flags) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  json j;
  try {
    j = read_json(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(j, flags);
}

json to_json(const RunConfig& c) {
  json shapes = json::array();
  for (const auto& e : c.phantom.shapes) shapes.push_back(shape_to_json(e));
  json step = c.fista.fista.step ? json(*c.fista.fista.step) : json("auto");
  return json{
      {"seed", c.seed},
      {"full_views", c.full_views},
      {"views", c.views},
      {"method", c.method},
      {"grid", to_json(c.grid)},
      {"geometry",
       {{"source_to_center", c.geometry.source_to_center},
        {"center_to_detector", c.geometry.center_to_detector},
        {"n_detectors", c.geometry.n_detectors},
        {"detector_width_total", c.geometry.detector_width_total},
        {"mode", to_string(c.geometry.mode)},
        {"detector_shape", to_string(c.geometry.detector)}}},
      {"phantom", {{"kind", to_string(c.phantom.kind)}, {"shapes", shapes}}},
      {"noise", {{"model", c.noise.model}, {"sigma", c.noise.sigma}, {"seed", c.noise.seed}}},
      {"data_range", c.data_range},
      {"inputs", {{"sinogram", c.sinogram_input}, {"truth", c.truth_input}}},
      {"sirt", {{"iters", c.sirt.iters}}},
      {"fista",
       {{"lambda", c.fista.fista.lambda},
        {"iters", c.fista.fista.n_iters},
        {"step", step},
        {"tv_inner_iters", c.fista.fista.tv_inner_iters},
        {"lambda_grid", c.fista.lambda_grid}}},
      {"dosm",
       {{"n_channels", c.dosm.n_channels},
        {"dc_inner_iters", c.dosm.dc_inner_iters},
        {"beta", c.dosm.beta},
        {"corrector_snr", c.dosm.corrector_snr},
        {"n_corrector_steps", c.dosm.n_corrector_steps},
        {"weights_mode", c.dosm.weights_mode},
        {"seed", c.dosm.seed},
        {"schedule", schedule_to_json(c.dosm.schedule)},
        {"coupling", to_string(c.dosm.coupling)},
        {"dc_start", to_string(c.dosm.dc_start)},
        {"dc_residual", to_string(c.dosm.dc_residual)},
        {"order", to_string(c.dosm.order)},
        {"inject_noise", c.dosm.inject_noise},
        {"checkpoint", c.checkpoint}}},
      {"train",
       {{"hidden_channels", c.train.arch.hidden_channels},
        {"dilations", c.train.arch.dilations},
        {"sigma_data", c.train.arch.sigma_data},
        {"epochs", c.train.train.epochs},
        {"batch_size", c.train.train.batch_size},
        {"learning_rate", c.train.train.learning_rate},
        {"adam_beta1", c.train.train.adam_beta1},
        {"adam_beta2", c.train.train.adam_beta2},
        {"adam_eps", c.train.train.adam_eps},
        {"crop", c.train.train.crop},
        {"flips", c.train.train.flips},
        {"seed", c.train.train.seed},
        {"n_images", c.train.n_images},
        {"data_seed", c.train.data_seed},
        {"init_seed", c.train.init_seed},
        {"images", c.train.images}}},
      {"ablate", {{"axis", c.ablate.axis}, {"values", c.ablate.values}}}};
}

std::string config_hash(const RunConfig& cfg) { return hex64(fnv1a64(to_json(cfg).dump())); }

FanBeamGeometry full_geometry(const RunConfig& cfg) {
  FanBeamGeometry g = cfg.geometry;
  g.view_angles = equispaced_angles(static_cast<std::size_t>(cfg.full_views), 2.0 * std::numbers::pi);
  return g;
}

std::vector<Image> training_images(const RunConfig& cfg) {
  std::vector<Image> out;
  if (!cfg.train.images.empty()) {
    for (const auto& base : cfg.train.images) out.push_back(read_image(base));
    return out;
  }
  Rng rng(cfg.train.data_seed);
  for (int k = 0; k < cfg.train.n_images; ++k) out.push_back(make_phantom(perturbed_shepp_logan(cfg.grid, rng)));
  return out;
}

}  // namespace dosmct
