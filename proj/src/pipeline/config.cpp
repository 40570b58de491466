#include "style3d/pipeline/config.hpp"

#include "style3d/error.hpp"
#include "style3d/json_fixed.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cmath>
#include <fstream>

namespace style3d::pipeline {
namespace {

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw ValidationError(field + ": " + why);
}

template <typename T>
void take(const nlohmann::json& j, const char* key, std::optional<T>& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(fmt::format("config key '{}' has the wrong type", key));
  }
}

}  // namespace

diffusion::BackendKind parse_backend(const std::string& s) {
  if (s == "toy") return diffusion::BackendKind::toy;
  if (s == "pretrained") return diffusion::BackendKind::pretrained;
  throw ValidationError("backend: expected toy or pretrained, got '" + s + "'");
}

mesh::SignConvention parse_convention(const std::string& s) {
  if (s == "positive_inside") return mesh::SignConvention::positive_inside;
  if (s == "negative_inside") return mesh::SignConvention::negative_inside;
  throw ValidationError("convention: expected positive_inside or negative_inside, got '" + s + "'");
}

const char* to_string(mesh::SignConvention c) {
  return c == mesh::SignConvention::positive_inside ? "positive_inside" : "negative_inside";
}

void RunConfig::validate() const {
  require(std::isfinite(beta.content) && std::isfinite(beta.preserve), "beta", "must be finite");
  require(beta.content >= 0.0 && beta.preserve >= 0.0, "beta", "weights must be >= 0");
  require(std::abs(beta.content + beta.preserve - 1.0) <= 1e-9, "beta",
          fmt::format("beta_c + beta_p must be 1, got {} + {}", beta.content, beta.preserve));
  require(std::isfinite(lambda) && lambda > 0.0, "lambda", fmt::format("must be > 0, got {}", lambda));
  require(steps >= 1, "steps", fmt::format("must be >= 1, got {}", steps));
  require(device == "cpu", "device", "only 'cpu' is supported by this build, got '" + device + "'");
  require(!layers.empty(), "layers", "at least one target layer is required");
  require(recon_steps >= 0, "recon_steps", "must be >= 0");
  require(recon_resolution >= 8 && recon_resolution % 8 == 0, "recon_resolution", "must be a positive multiple of 8");
  require(std::isfinite(recon_lr) && recon_lr >= 0.0, "recon_lr", "must be >= 0");
  require(grid_resolution >= 2, "grid_resolution", "must be >= 2");
  for (double w : {loss_weights.lpips, loss_weights.mask, loss_weights.depth, loss_weights.normal, loss_weights.reg})
    require(std::isfinite(w) && w >= 0.0, "loss_weights", "must be finite and >= 0");
}

attn::AttnConfig RunConfig::attn_config() const { return attn::AttnConfig(lambda, beta, layers); }

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["content"] = content.string();
  j["style"] = style.string();
  j["beta_c"] = beta.content;
  j["beta_p"] = beta.preserve;
  j["lambda"] = lambda;
  j["steps"] = steps;
  j["seed"] = seed;
  j["backend"] = diffusion::to_string(backend);
  j["weights"] = weights ? weights->string() : std::string();
  j["device"] = device;
  j["convention"] = to_string(convention);
  j["layers"] = layers;
  j["loss_weights"] = {{"lpips", loss_weights.lpips},
                       {"mask", loss_weights.mask},
                       {"depth", loss_weights.depth},
                       {"normal", loss_weights.normal},
                       {"reg", loss_weights.reg}};
  j["recon_steps"] = recon_steps;
  j["recon_resolution"] = recon_resolution;
  j["recon_lr"] = recon_lr;
  j["grid_resolution"] = grid_resolution;
  return j;
}

std::string RunConfig::hash() const { return hex64(fnv1a64(dump_fixed(to_json(), 12))); }

ConfigLayer layer_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("config file must hold a JSON object");
  static const std::vector<std::string> known = {
      "content", "style", "backend", "weights", "device", "out", "convention", "beta_c", "beta_p",
      "lambda", "steps", "seed", "layers", "loss_weights", "recon_steps", "recon_resolution", "recon_lr",
      "grid_resolution"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ValidationError("unknown config key '" + it.key() + "'");
  ConfigLayer l;
  take(j, "content", l.content);
  take(j, "style", l.style);
  take(j, "backend", l.backend);
  take(j, "weights", l.weights);
  take(j, "device", l.device);
  take(j, "out", l.out);
  take(j, "convention", l.convention);
  take(j, "beta_c", l.beta_c);
  take(j, "beta_p", l.beta_p);
  take(j, "lambda", l.lambda);
  take(j, "steps", l.steps);
  take(j, "seed", l.seed);
  take(j, "layers", l.layers);
  take(j, "recon_steps", l.recon_steps);
  take(j, "recon_resolution", l.recon_resolution);
  take(j, "recon_lr", l.recon_lr);
  take(j, "grid_resolution", l.grid_resolution);
  if (j.contains("loss_weights")) {
    const auto& w = j["loss_weights"];
    if (!w.is_object()) throw ValidationError("loss_weights must be an object");
    take(w, "lpips", l.w_lpips);
    take(w, "mask", l.w_mask);
    take(w, "depth", l.w_depth);
    take(w, "normal", l.w_normal);
    take(w, "reg", l.w_reg);
  }
  return l;
}

void apply_layer(RunConfig& cfg, const ConfigLayer& l) {
  if (l.content) cfg.content = *l.content;
  if (l.style) cfg.style = *l.style;
  if (l.backend) cfg.backend = parse_backend(*l.backend);
  if (l.weights) cfg.weights = *l.weights;
  if (l.device) cfg.device = *l.device;
  if (l.out) cfg.out = *l.out;
  if (l.convention) cfg.convention = parse_convention(*l.convention);
  if (l.beta_c && l.beta_p) {
    cfg.beta = {*l.beta_c, *l.beta_p};
  } else if (l.beta_c) {
    cfg.beta = {*l.beta_c, 1.0 - *l.beta_c};
  } else if (l.beta_p) {
    cfg.beta = {1.0 - *l.beta_p, *l.beta_p};
  }
  if (l.lambda) cfg.lambda = *l.lambda;
  if (l.steps) cfg.steps = *l.steps;
  if (l.seed) cfg.seed = *l.seed;
  if (l.layers) cfg.layers = *l.layers;
  if (l.w_lpips) cfg.loss_weights.lpips = *l.w_lpips;
  if (l.w_mask) cfg.loss_weights.mask = *l.w_mask;
  if (l.w_depth) cfg.loss_weights.depth = *l.w_depth;
  if (l.w_normal) cfg.loss_weights.normal = *l.w_normal;
  if (l.w_reg) cfg.loss_weights.reg = *l.w_reg;
  if (l.recon_steps) cfg.recon_steps = *l.recon_steps;
  if (l.recon_resolution) cfg.recon_resolution = *l.recon_resolution;
  if (l.recon_lr) cfg.recon_lr = *l.recon_lr;
  if (l.grid_resolution) cfg.grid_resolution = *l.grid_resolution;
}

void add_run_options(CLI::App& app, ConfigLayer& f, std::string& config_file) {
  app.add_option("--config", config_file, "JSON file with run settings; flags override it");
  app.add_option("--content", f.content, "content image (PNG or JPEG)");
  app.add_option("--style", f.style, "style image (PNG or JPEG)");
  app.add_option("--beta-c", f.beta_c, "content query weight; beta_p defaults to 1 - beta_c");
  app.add_option("--beta-p", f.beta_p, "preserved query weight");
  app.add_option("--lambda", f.lambda, "attention temperature factor (> 0)");
  app.add_option("--steps", f.steps, "inversion / denoising steps");
  app.add_option("--seed", f.seed, "sampler seed");
  app.add_option("--backend", f.backend, "toy or pretrained");
  app.add_option("--weights", f.weights, "pretrained checkpoint (default: $STYLE3D_CACHE/mv_backend.s3d)");
  app.add_option("--device", f.device, "compute device (cpu)");
  app.add_option("--out", f.out, "output root; each run writes run_<hash>/ inside it");
  app.add_option("--convention", f.convention, "SDF sign: positive_inside or negative_inside");
  app.add_option("--layers", f.layers, "fusion target layers (names or globs)");
  app.add_option("--w-lpips", f.w_lpips);
  app.add_option("--w-mask", f.w_mask);
  app.add_option("--w-depth", f.w_depth);
  app.add_option("--w-normal", f.w_normal);
  app.add_option("--w-reg", f.w_reg);
  app.add_option("--recon-steps", f.recon_steps, "reconstruction fitting steps on the generated views");
  app.add_option("--recon-resolution", f.recon_resolution, "view resolution used for fitting (multiple of 8)");
  app.add_option("--recon-lr", f.recon_lr);
  app.add_option("--grid-resolution", f.grid_resolution, "mesh extraction cells per axis");
}

RunConfig resolve_config(const ConfigLayer& flags, const std::string& config_file) {
  RunConfig cfg;
  if (!config_file.empty()) {
    std::ifstream in(config_file);
    if (!in) throw ValidationError("config: cannot open " + config_file);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("config: " + config_file + " is not valid JSON: " + e.what());
    }
    apply_layer(cfg, layer_from_json(j));
  }
  apply_layer(cfg, flags);
  cfg.validate();
  return cfg;
}

RunConfig parse_config(const std::vector<std::string>& args) {
  CLI::App app("run");
  ConfigLayer flags;
  std::string config_file;
  add_run_options(app, flags, config_file);
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    throw ValidationError(std::string("arguments: ") + e.what());
  }
  return resolve_config(flags, config_file);
}

}  // namespace style3d::pipeline
