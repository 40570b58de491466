#include "style3d/pipeline/pipeline.hpp"

#include "internal.hpp"
#include "style3d/diffusion/stylize.hpp"
#include "style3d/error.hpp"
#include "style3d/image_io.hpp"
#include "style3d/json_fixed.hpp"
#include "style3d/mesh/export.hpp"
#include "style3d/recon/model.hpp"
#include "style3d/recon/train.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <fstream>

namespace style3d::pipeline {
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
  if (!out) throw ValidationError("failed writing " + path.string());
}

}  // namespace

const char* tool_version() { return STYLE3D_VERSION; }

nlohmann::ordered_json RunReport::to_json() const {
  nlohmann::ordered_json j;
  j["tool"] = "style3d";
  j["version"] = tool_version();
  j["config_hash"] = config_hash;
  j["config"] = config.to_json();
  j["backend"] = {{"kind", backend_kind}, {"weight_source", weight_source}, {"hooked_layers", hooked_layers}};
  j["preprocessing"] = diffusion::preprocessing_description();
  j["artifacts"] = artifacts;
  j["mesh"] = {{"vertices", mesh_vertices}, {"faces", mesh_faces}, {"watertight", mesh_watertight}};
  j["reconstruction"] = {{"steps", config.recon_steps},
                         {"initial_loss", recon_initial_loss},
                         {"final_loss", recon_final_loss}};
  j["timings_file"] = "run_timings.json";
  return j;
}

std::shared_ptr<const diffusion::Backend> load_backend(const RunConfig& cfg) {
  if (cfg.backend == diffusion::BackendKind::toy) return diffusion::make_toy_backend();
  return diffusion::load_pretrained_backend(diffusion::resolve_weight_path(cfg.weights));
}

std::pair<Image, Image> load_inputs(const RunConfig& cfg) {
  std::vector<std::string> problems;
  for (const auto& [what, path] : {std::pair{"content", cfg.content}, std::pair{"style", cfg.style}}) {
    if (path.empty()) {
      problems.push_back(fmt::format("{}: no path given", what));
    } else if (!fs::is_regular_file(path)) {
      problems.push_back(fmt::format("{}: missing file {}", what, path.string()));
    }
  }
  if (!problems.empty()) {
    std::string msg = "input check failed:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ValidationError(msg);
  }
  Image content, style;
  try {
    content = read_image(cfg.content);
  } catch (const Error& e) {
    throw ValidationError("content: " + std::string(e.what()));
  }
  try {
    style = read_image(cfg.style);
  } catch (const Error& e) {
    throw ValidationError("style: " + std::string(e.what()));
  }
  return {std::move(content), std::move(style)};
}

diffusion::FeatureBank capture_bank(const Image& content, const Image& style, const diffusion::Backend& backend,
                                    const attn::AttnConfig& cfg, int steps) {
  using namespace diffusion;
  const LatentTrajectory st = ddpm_invert(style, backend, steps, TrajectorySource::style);
  const FeatureBank style_bank = capture_features(st, backend, cfg, CaptureRole::style);
  const LatentTrajectory ct = ddpm_invert(content, backend, steps, TrajectorySource::content);
  const FeatureBank content_bank = capture_features(ct, backend, cfg, CaptureRole::content);
  return style_bank.merged_with(content_bank);
}

namespace detail {

double Stopwatch::lap() {
  const auto now = std::chrono::steady_clock::now();
  const double s = std::chrono::duration<double>(now - last_).count();
  last_ = now;
  return s;
}

RunOutput run_with_bank(const RunConfig& cfg, const Image& content, const diffusion::FeatureBank& bank,
                        const diffusion::Backend& backend, std::vector<std::pair<std::string, double>> timings) {
  Stopwatch clock;
  RunOutput out;
  RunReport& rep = out.report;
  rep.config = cfg;
  rep.config_hash = cfg.hash();
  rep.backend_kind = diffusion::to_string(backend.kind());
  rep.weight_source = backend.weight_source();
  const attn::AttnConfig acfg = cfg.attn_config();
  rep.hooked_layers = attn::select_target_layers(backend.attention_layers(), acfg);

  const diffusion::ViewGrid grid =
      diffusion::generate_multiview(content, bank, backend, acfg, {cfg.steps, cfg.seed, 0.0});
  out.tile = grid.tile;
  timings.emplace_back("generate", clock.lap());

  // Fit the reconstruction model to the generated views.
  recon::PosedViewBatch batch;
  for (int i = 0; i < diffusion::kNumViews; ++i) {
    Image v = resize_area(to_rgb_over_white(grid.views[i]), cfg.recon_resolution, cfg.recon_resolution);
    batch.masks.push_back(recon::mask_from_white_background(v));
    batch.images.push_back(std::move(v));
    batch.cameras.push_back(grid.poses[i]);
  }
  recon::ReconConfig rc;
  rc.grid_resolution = cfg.grid_resolution;
  rc.convention = cfg.convention;
  rc.seed = cfg.seed;
  recon::ReconModel model(rc);
  if (cfg.recon_steps > 0) {
    recon::TrainSchedule sched;
    sched.total_steps = cfg.recon_steps;
    sched.base_lr = cfg.recon_lr;
    recon::TrainOptions topt;
    topt.weights = cfg.loss_weights;
    topt.samples = 16;
    const recon::TrainResult tr = recon::train_loop(model, batch, sched, topt);
    rep.recon_initial_loss = tr.history.front().total;
    rep.recon_final_loss = tr.history.back().total;
  }
  timings.emplace_back("reconstruct", clock.lap());

  const recon::Triplane tp = recon::decode_triplane(model, recon::encode_views(model, batch));
  const mesh::MeshResult m = recon::extract_colored_mesh(model, tp);
  rep.mesh_vertices = static_cast<int>(m.vertices.size());
  rep.mesh_faces = static_cast<int>(m.faces.size());
  rep.mesh_watertight = mesh::mesh_stats(m).watertight;
  timings.emplace_back("extract_mesh", clock.lap());

  // Stage everything, then swap the directory into place.
  const fs::path final_dir = cfg.out / ("run_" + rep.config_hash);
  const fs::path stage = cfg.out / (".staging_run_" + rep.config_hash);
  fs::remove_all(stage);
  try {
    fs::create_directories(stage);
    diffusion::save_view_grid(grid, stage);
    mesh::write_obj(stage / "mesh.obj", m);
    mesh::write_glb(stage / "mesh.glb", m);
    timings.emplace_back("write", clock.lap());
    rep.timings = timings;

    nlohmann::ordered_json tj = nlohmann::ordered_json::object();
    for (const auto& [name, s] : timings) tj[name] = s;
    write_text(stage / "run_timings.json", dump_fixed(tj, 6));

    for (const auto& e : fs::directory_iterator(stage)) rep.artifacts.push_back(e.path().filename().string());
    rep.artifacts.push_back("report.json");
    std::sort(rep.artifacts.begin(), rep.artifacts.end());
    write_text(stage / "report.json", dump_fixed(rep.to_json(), 6));

    fs::remove_all(final_dir);
    fs::rename(stage, final_dir);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(stage, ec);
    throw;
  }
  rep.dir = final_dir;
  return out;
}

}  // namespace detail

RunReport run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  detail::Stopwatch clock;
  std::vector<std::pair<std::string, double>> timings;
  const auto [content, style] = load_inputs(cfg);
  const auto backend = load_backend(cfg);
  // Resolve layers before any compute so a missing hook fails fast.
  const attn::AttnConfig acfg = cfg.attn_config();
  attn::select_target_layers(backend->attention_layers(), acfg);
  timings.emplace_back("load", clock.lap());
  const diffusion::FeatureBank bank = capture_bank(content, style, *backend, acfg, cfg.steps);
  timings.emplace_back("invert_capture", clock.lap());
  return detail::run_with_bank(cfg, content, bank, *backend, std::move(timings)).report;
}

}  // namespace style3d::pipeline
