#pragma once

#include "style3d/attention.hpp"
#include "style3d/diffusion/backend.hpp"
#include "style3d/mesh/sdf_grid.hpp"
#include "style3d/recon/losses.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace CLI {
class App;
}

namespace style3d::pipeline {

struct RunConfig {
  std::filesystem::path content;
  std::filesystem::path style;
  attn::Beta beta;  // (0.4, 0.6)
  double lambda = 1.5;
  int steps = 65;
  std::uint64_t seed = 42;
  diffusion::BackendKind backend = diffusion::BackendKind::toy;
  std::optional<std::filesystem::path> weights;  // pretrained checkpoint; default lookup when unset
  std::string device = "cpu";
  std::filesystem::path out = "out";
  mesh::SignConvention convention = mesh::SignConvention::positive_inside;
  recon::LossWeights loss_weights;
  std::vector<std::string> layers = attn::default_fusion_layers();

  // Reconstruction fit on the generated views.
  int recon_steps = 30;
  int recon_resolution = 16;
  double recon_lr = 1e-3;
  int grid_resolution = 32;

  // Throws ValidationError naming the offending field.
  void validate() const;
  attn::AttnConfig attn_config() const;
  // Everything that determines the artifacts; the output directory is left out.
  nlohmann::ordered_json to_json() const;
  // Hex hash of to_json(), used to name the run directory.
  std::string hash() const;
};

// One layer of settings: only what a source explicitly set.
struct ConfigLayer {
  std::optional<std::string> content, style, backend, weights, device, out, convention;
  std::optional<double> beta_c, beta_p, lambda;
  std::optional<int> steps;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<std::string>> layers;
  std::optional<double> w_lpips, w_mask, w_depth, w_normal, w_reg;
  std::optional<int> recon_steps, recon_resolution, grid_resolution;
  std::optional<double> recon_lr;
};

// Keys mirror the long CLI flag names with '_' for '-'. Unknown keys are an error.
ConfigLayer layer_from_json(const nlohmann::json& j);

// Applies a layer on top of cfg. A lone beta_c or beta_p takes the other
// weight as its complement.
void apply_layer(RunConfig& cfg, const ConfigLayer& layer);

// Registers the run flags (and --config) on a CLI11 app.
void add_run_options(CLI::App& app, ConfigLayer& flags, std::string& config_file);

// defaults <- config file <- flags, then validate().
RunConfig resolve_config(const ConfigLayer& flags, const std::string& config_file);

// Parses a `run` argument list (without the program or subcommand name).
RunConfig parse_config(const std::vector<std::string>& args);

diffusion::BackendKind parse_backend(const std::string& s);
mesh::SignConvention parse_convention(const std::string& s);
const char* to_string(mesh::SignConvention c);

}  // namespace style3d::pipeline
