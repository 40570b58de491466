#pragma once

// End-to-end run: content + style -> stylized six views -> fitted triplane ->
// mesh, persisted under a config-hashed directory.

#include "style3d/diffusion/feature_bank.hpp"
#include "style3d/diffusion/view_grid.hpp"
#include "style3d/pipeline/config.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace style3d::pipeline {

const char* tool_version();

struct RunReport {
  RunConfig config;
  std::string config_hash;
  std::filesystem::path dir;           // out/run_<hash>
  std::vector<std::string> artifacts;  // file names inside dir, sorted
  std::string backend_kind;
  std::string weight_source;
  std::vector<std::string> hooked_layers;
  int mesh_vertices = 0;
  int mesh_faces = 0;
  bool mesh_watertight = false;
  double recon_initial_loss = 0.0;
  double recon_final_loss = 0.0;
  // Wall-clock seconds per stage. Kept out of report.json so that file stays
  // byte-deterministic; written to run_timings.json instead.
  std::vector<std::pair<std::string, double>> timings;

  nlohmann::ordered_json to_json() const;
};

// Toy backend, or the pretrained checkpoint (BackendError naming the source).
std::shared_ptr<const diffusion::Backend> load_backend(const RunConfig& cfg);

// Decodes content and style; every missing or unreadable input is named in
// one ValidationError.
std::pair<Image, Image> load_inputs(const RunConfig& cfg);

// Style K/V and content preserved queries along both inversion trajectories.
// Independent of beta and lambda.
diffusion::FeatureBank capture_bank(const Image& content, const Image& style, const diffusion::Backend& backend,
                                    const attn::AttnConfig& cfg, int steps);

// All-or-nothing: artifacts are staged and moved into place only after
// report.json is written, so a failed run leaves no report behind.
RunReport run_pipeline(const RunConfig& cfg);

enum class SweepParam { beta, lambda };
SweepParam parse_sweep_param(const std::string& s);
const char* to_string(SweepParam p);

struct SweepResult {
  std::filesystem::path dir;  // out/sweep_<hash>: contact_sheet.png, sweep.json
  std::vector<RunReport> runs;
  // Mean row entropy (nats) of the fused attention weights per target layer,
  // evaluated on the bank's preserved queries against the style keys.
  std::vector<std::vector<std::pair<std::string, double>>> layer_entropy;
  Image contact_sheet;
};

// One run per value (beta values are beta_c, with beta_p = 1 - beta_c), all
// sharing one captured bank. Each run lands in the same run_<hash> directory a
// plain run_pipeline with that value would produce. Every value is validated
// before any compute.
SweepResult sweep(SweepParam param, const std::vector<double>& values, const RunConfig& base);

// Config for a single sweep value.
RunConfig sweep_config(SweepParam param, double value, const RunConfig& base);

}  // namespace style3d::pipeline
