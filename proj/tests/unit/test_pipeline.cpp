#include "style3d/attention.hpp"
#include "style3d/error.hpp"
#include "style3d/image_io.hpp"
#include "style3d/pipeline/label_font.hpp"
#include "style3d/pipeline/pipeline.hpp"

#include <doctest.h>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace style3d;
using namespace style3d::pipeline;
namespace fs = std::filesystem;

namespace {

const fs::path kAssets = STYLE3D_ASSETS;

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("style3d_test_pipeline_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Short schedule so each run takes about a second.
RunConfig small_config(const fs::path& out) {
  RunConfig cfg;
  cfg.content = kAssets / "content.png";
  cfg.style = kAssets / "style.png";
  cfg.steps = 8;
  cfg.recon_steps = 4;
  cfg.grid_resolution = 16;
  cfg.out = out;
  return cfg;
}

bool has_report_anywhere(const fs::path& root) {
  if (!fs::exists(root)) return false;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.path().filename() == "report.json") return true;
  return false;
}

}  // namespace

TEST_CASE("no flags resolve to the published defaults") {
  const RunConfig cfg = parse_config({"--content", "c.png", "--style", "s.png"});
  CHECK(cfg.beta.content == 0.4);
  CHECK(cfg.beta.preserve == 0.6);
  CHECK(cfg.lambda == 1.5);
  CHECK(cfg.steps == 65);
  CHECK(cfg.seed == 42);
  CHECK(cfg.backend == diffusion::BackendKind::toy);
  CHECK(cfg.layers == attn::default_fusion_layers());
  CHECK(cfg.loss_weights.depth == 0.5);
  CHECK(cfg.loss_weights.normal == 0.2);
  CHECK(cfg.loss_weights.reg == 0.01);
}

TEST_CASE("a lone beta weight takes its complement") {
  const RunConfig a = parse_config({"--beta-c", "0.7"});
  CHECK(a.beta.content == 0.7);
  CHECK(a.beta.preserve == doctest::Approx(0.3).epsilon(1e-15));
  const RunConfig b = parse_config({"--beta-p", "0.25"});
  CHECK(b.beta.content == 0.75);
  CHECK(b.beta.preserve == 0.25);
}

TEST_CASE("flags override the config file, which overrides defaults") {
  const fs::path d = fresh_dir("precedence");
  std::ofstream(d / "cfg.json") << R"({"steps": 10, "lambda": 2.0, "beta_c": 0.6, "loss_weights": {"reg": 0.05}})";
  const RunConfig cfg = parse_config({"--config", (d / "cfg.json").string(), "--steps", "20"});
  CHECK(cfg.steps == 20);
  CHECK(cfg.lambda == 2.0);
  CHECK(cfg.beta.content == 0.6);
  CHECK(cfg.loss_weights.reg == 0.05);
  CHECK(cfg.seed == 42);
  // A file-level beta_c is overridden as a pair by a flag-level beta_p.
  const RunConfig cfg2 = parse_config({"--config", (d / "cfg.json").string(), "--beta-p", "0.9"});
  CHECK(cfg2.beta.content == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("invalid settings name their field") {
  auto message = [](std::vector<std::string> args) {
    try {
      parse_config(args);
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message({"--beta-c", "0.5", "--beta-p", "0.6"}).rfind("beta", 0) == 0);
  CHECK(message({"--lambda", "0"}).rfind("lambda", 0) == 0);
  CHECK(message({"--lambda", "-1"}).rfind("lambda", 0) == 0);
  CHECK(message({"--steps", "0"}).rfind("steps", 0) == 0);
  CHECK(message({"--device", "cuda:0"}).rfind("device", 0) == 0);
  CHECK(message({"--backend", "big"}).rfind("backend", 0) == 0);
  CHECK(message({"--bogus"}).find("arguments") != std::string::npos);

  const fs::path d = fresh_dir("badkey");
  std::ofstream(d / "cfg.json") << R"({"stepz": 3})";
  CHECK(message({"--config", (d / "cfg.json").string()}).find("stepz") != std::string::npos);
}

TEST_CASE("config hash ignores the output directory and tracks everything else") {
  RunConfig a;
  RunConfig b = a;
  b.out = "elsewhere";
  CHECK(a.hash() == b.hash());
  b.lambda = 1.25;
  CHECK(a.hash() != b.hash());
  CHECK(a.hash().size() == 16);
}

TEST_CASE("missing style fails before compute and leaves no report") {
  const fs::path d = fresh_dir("missing");
  RunConfig cfg = small_config(d / "out");
  cfg.style = d / "nope.png";
  cfg.content = d / "also_nope.png";
  try {
    run_pipeline(cfg);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("nope.png") != std::string::npos);
    CHECK(msg.find("also_nope.png") != std::string::npos);
  }
  CHECK_FALSE(has_report_anywhere(d / "out"));
}

TEST_CASE("undecodable input is a validation error") {
  const fs::path d = fresh_dir("garbage");
  std::ofstream(d / "bad.png") << "not an image";
  RunConfig cfg = small_config(d / "out");
  cfg.style = d / "bad.png";
  CHECK_THROWS_AS(run_pipeline(cfg), ValidationError);
  CHECK_FALSE(has_report_anywhere(d / "out"));
}

TEST_CASE("pretrained backend without weights names the weight source") {
  const fs::path d = fresh_dir("weights");
  RunConfig cfg = small_config(d / "out");
  cfg.backend = diffusion::BackendKind::pretrained;
  cfg.weights = d / "missing_weights.s3d";
  try {
    run_pipeline(cfg);
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(std::string(e.what()).find("missing_weights.s3d") != std::string::npos);
  }
  CHECK_FALSE(has_report_anywhere(d / "out"));
}

TEST_CASE("toy end-to-end run writes every artifact") {
  const fs::path d = fresh_dir("smoke");
  const RunReport rep = run_pipeline(small_config(d));
  CHECK(rep.dir == d / ("run_" + rep.config_hash));
  CHECK(rep.mesh_vertices > 0);
  CHECK(rep.mesh_faces > 0);
  for (const char* name : {"views.png", "view_0.png", "view_5.png", "poses.json", "mesh.obj", "mesh.glb",
                           "report.json", "run_timings.json"}) {
    CHECK(std::find(rep.artifacts.begin(), rep.artifacts.end(), name) != rep.artifacts.end());
  }
  for (const auto& a : rep.artifacts) CHECK(fs::is_regular_file(rep.dir / a));
  CHECK_FALSE(fs::exists(d / (".staging_run_" + rep.config_hash)));

  const auto j = nlohmann::json::parse(slurp(rep.dir / "report.json"));
  CHECK(j["config"]["steps"] == 8);
  CHECK(j["backend"]["kind"] == "toy");
  CHECK(j["backend"]["hooked_layers"].size() == 5);
  CHECK(j["mesh"]["vertices"] == rep.mesh_vertices);
  CHECK(rep.recon_final_loss < rep.recon_initial_loss);
  const Image tile = read_image(rep.dir / "views.png");
  CHECK(tile.width * 3 == tile.height * 2);
}

TEST_CASE("runs are byte deterministic") {
  const fs::path d = fresh_dir("determinism");
  const RunReport a = run_pipeline(small_config(d / "a"));
  const RunReport b = run_pipeline(small_config(d / "b"));
  for (const char* name : {"views.png", "mesh.obj", "mesh.glb", "poses.json", "report.json"}) {
    CHECK_MESSAGE(slurp(a.dir / name) == slurp(b.dir / name), name);
  }
}

TEST_CASE("single-value sweep matches a plain run") {
  const fs::path d = fresh_dir("sweep_single");
  RunConfig base = small_config(d / "sweep");
  const SweepResult s = sweep(SweepParam::lambda, {1.5}, base);
  const RunReport plain = run_pipeline(small_config(d / "plain"));
  REQUIRE(s.runs.size() == 1);
  CHECK(s.runs[0].dir.filename() == plain.dir.filename());
  for (const char* name : {"views.png", "mesh.obj", "mesh.glb", "report.json"}) {
    CHECK_MESSAGE(slurp(s.runs[0].dir / name) == slurp(plain.dir / name), name);
  }
  CHECK(fs::is_regular_file(s.dir / "contact_sheet.png"));
  CHECK(fs::is_regular_file(s.dir / "sweep.json"));
}

TEST_CASE("lambda sweep: per-layer attention entropy is non-increasing") {
  const fs::path d = fresh_dir("sweep_lambda");
  RunConfig base = small_config(d);
  base.recon_steps = 0;
  const std::vector<double> values{0.5, 1.0, 1.5, 2.0};
  const SweepResult s = sweep(SweepParam::lambda, values, base);
  REQUIRE(s.layer_entropy.size() == values.size());
  const std::size_t layers = s.layer_entropy[0].size();
  CHECK(layers == 5);
  for (std::size_t l = 0; l < layers; ++l) {
    for (std::size_t i = 1; i < values.size(); ++i) {
      CHECK(s.layer_entropy[i][l].second <= s.layer_entropy[i - 1][l].second + 1e-12);
    }
    CHECK(s.layer_entropy.back()[l].second < s.layer_entropy.front()[l].second);
  }
  // Four labeled columns side by side.
  CHECK(s.contact_sheet.width > 4 * 64);
  const auto j = nlohmann::json::parse(slurp(s.dir / "sweep.json"));
  CHECK(j["runs"].size() == 4);
  CHECK(j["runs"][3]["label"] == "lambda=2.00");
}

TEST_CASE("beta sweep over the figure axis uses distinct runs") {
  const fs::path d = fresh_dir("sweep_beta");
  RunConfig base = small_config(d);
  base.recon_steps = 0;
  const SweepResult s = sweep(SweepParam::beta, {1.0, 0.6, 0.4, 0.0}, base);
  REQUIRE(s.runs.size() == 4);
  CHECK(s.runs[0].config.beta == attn::Beta{1.0, 0.0});
  CHECK(s.runs[3].config.beta == attn::Beta{0.0, 1.0});
  CHECK(slurp(s.runs[0].dir / "views.png") != slurp(s.runs[3].dir / "views.png"));
}

TEST_CASE("any invalid sweep value rejects the sweep before compute") {
  const fs::path d = fresh_dir("sweep_invalid");
  RunConfig base = small_config(d / "out");
  try {
    sweep(SweepParam::lambda, {1.0, 2.0, -0.5}, base);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("values[2]") != std::string::npos);
  }
  CHECK_THROWS_AS(sweep(SweepParam::beta, {0.5, 1.2}, base), ValidationError);
  CHECK_THROWS_AS(sweep(SweepParam::beta, {}, base), ValidationError);
  CHECK_FALSE(fs::exists(d / "out"));
  CHECK_THROWS_AS(parse_sweep_param("gamma"), ValidationError);
}

TEST_CASE("label font draws inside its advertised box") {
  Image img(64, 16, 3, 1.0);
  const std::string text = "beta=(0.40,0.60)";
  draw_label(img, 1, 2, text);
  int min_x = 1000, max_x = -1, min_y = 1000, max_y = -1;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      if (img.at(x, y, 0) == 0.0) {
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
      }
  CHECK(min_x >= 1);
  CHECK(min_y >= 2);
  CHECK(max_y < 2 + kGlyphHeight);
  CHECK(label_width(text) == 16 * kGlyphAdvance - 1);
  CHECK(label_width(text, 2) == 2 * label_width(text));
}
