#include "internal.hpp"
#include "style3d/diffusion/stylize.hpp"
#include "style3d/error.hpp"
#include "style3d/image_io.hpp"
#include "style3d/json_fixed.hpp"
#include "style3d/pipeline/label_font.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>

namespace style3d::pipeline {
namespace fs = std::filesystem;

namespace {

constexpr int kLabelScale = 2;
constexpr int kPad = 6;

std::string value_label(SweepParam p, const RunConfig& cfg) {
  if (p == SweepParam::beta) return fmt::format("beta=({:.2f},{:.2f})", cfg.beta.content, cfg.beta.preserve);
  return fmt::format("lambda={:.2f}", cfg.lambda);
}

Image contact_sheet(const std::vector<Image>& tiles, const std::vector<std::string>& labels) {
  int tile_w = 0, tile_h = 0, label_w = 0;
  for (const Image& t : tiles) {
    tile_w = std::max(tile_w, t.width);
    tile_h = std::max(tile_h, t.height);
  }
  for (const auto& l : labels) label_w = std::max(label_w, label_width(l, kLabelScale));
  const int col_w = std::max(tile_w, label_w);
  const int label_h = kGlyphHeight * kLabelScale + kPad;
  const int n = static_cast<int>(tiles.size());
  Image sheet(kPad + n * (col_w + kPad), kPad + label_h + tile_h + kPad, 3, 1.0);
  for (int i = 0; i < n; ++i) {
    const int x0 = kPad + i * (col_w + kPad);
    draw_label(sheet, x0, kPad, labels[i], kLabelScale);
    paste(sheet, to_rgb_over_white(tiles[i]), x0, kPad + label_h);
  }
  return sheet;
}

std::vector<std::pair<std::string, double>> bank_entropy(const diffusion::FeatureBank& bank,
                                                         const std::vector<std::string>& layers,
                                                         const attn::AttnConfig& cfg, int steps) {
  std::vector<std::pair<std::string, double>> out;
  const std::vector<int> active = diffusion::active_steps(cfg, steps);
  for (const auto& layer : layers) {
    double sum = 0.0;
    int count = 0;
    for (int step : active) {
      const auto* kv = bank.find_key_value(layer, step);
      const auto* qp = bank.find_preserve_query(layer, step);
      if (!kv || !qp) continue;
      const attn::FeatureTensor q(qp->data(), layer, step, attn::FeatureKind::query);
      const Eigen::VectorXd h = attn::row_entropy(attn::fused_attention_weights(q, *qp, kv->key, cfg, step));
      sum += h.mean();
      ++count;
    }
    out.emplace_back(layer, count ? sum / count : 0.0);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

}  // namespace

SweepParam parse_sweep_param(const std::string& s) {
  if (s == "beta") return SweepParam::beta;
  if (s == "lambda") return SweepParam::lambda;
  throw ValidationError("param: expected beta or lambda, got '" + s + "'");
}

const char* to_string(SweepParam p) { return p == SweepParam::beta ? "beta" : "lambda"; }

RunConfig sweep_config(SweepParam param, double value, const RunConfig& base) {
  RunConfig cfg = base;
  if (param == SweepParam::beta) {
    cfg.beta = {value, 1.0 - value};
  } else {
    cfg.lambda = value;
  }
  return cfg;
}

SweepResult sweep(SweepParam param, const std::vector<double>& values, const RunConfig& base) {
  if (values.empty()) throw ValidationError("values: a sweep needs at least one value");
  std::vector<RunConfig> configs;
  for (std::size_t i = 0; i < values.size(); ++i) {
    RunConfig cfg = sweep_config(param, values[i], base);
    if (param == SweepParam::beta && !(values[i] >= 0.0 && values[i] <= 1.0)) {
      throw ValidationError(fmt::format("values[{}]: beta_c must lie in [0, 1], got {}", i, values[i]));
    }
    try {
      cfg.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("values[{}] = {}: {}", i, values[i], e.what()));
    }
    configs.push_back(std::move(cfg));
  }

  detail::Stopwatch clock;
  const auto [content, style] = load_inputs(base);
  const auto backend = load_backend(base);
  const attn::AttnConfig base_attn = base.attn_config();
  const std::vector<std::string> layers = attn::select_target_layers(backend->attention_layers(), base_attn);
  const double load_s = clock.lap();
  const diffusion::FeatureBank bank = capture_bank(content, style, *backend, base_attn, base.steps);
  const double capture_s = clock.lap();

  SweepResult res;
  std::vector<Image> tiles;
  std::vector<std::string> labels;
  for (const RunConfig& cfg : configs) {
    detail::RunOutput o =
        detail::run_with_bank(cfg, content, bank, *backend, {{"load", load_s}, {"invert_capture", capture_s}});
    res.layer_entropy.push_back(bank_entropy(bank, layers, cfg.attn_config(), cfg.steps));
    tiles.push_back(std::move(o.tile));
    labels.push_back(value_label(param, cfg));
    res.runs.push_back(std::move(o.report));
  }
  res.contact_sheet = contact_sheet(tiles, labels);

  std::string key = std::string(to_string(param)) + "|" + base.hash();
  for (double v : values) key += fmt::format("|{:.17g}", v);
  res.dir = base.out / ("sweep_" + hex64(fnv1a64(key)));
  fs::create_directories(res.dir);
  write_png(res.dir / "contact_sheet.png", res.contact_sheet);

  nlohmann::ordered_json j;
  j["param"] = to_string(param);
  j["base_config_hash"] = base.hash();
  auto runs = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < values.size(); ++i) {
    nlohmann::ordered_json r;
    r["value"] = values[i];
    r["label"] = labels[i];
    r["run_dir"] = res.runs[i].dir.filename().string();
    nlohmann::ordered_json ent = nlohmann::ordered_json::object();
    for (const auto& [layer, h] : res.layer_entropy[i]) ent[layer] = h;
    r["attention_entropy"] = std::move(ent);
    runs.push_back(std::move(r));
  }
  j["runs"] = std::move(runs);
  write_text(res.dir / "sweep.json", dump_fixed(j, 6));
  return res;
}

}  // namespace style3d::pipeline
