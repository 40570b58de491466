#include "style3d/attention.hpp"
#include "style3d/checkpoint.hpp"
#include "style3d/diffusion/backend.hpp"
#include "style3d/diffusion/view_grid.hpp"
#include "style3d/camera_pose.hpp"
#include "style3d/error.hpp"
#include "style3d/rng.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>

namespace style3d::diffusion {
namespace {

constexpr const char* kArchitecture = "mv-unet-lite";

struct LayerWeights {
  Matrix wq, wk, wv, wo;
  bool self_attention = true;
};

bool is_self_attention(const std::string& name) {
  return name.size() >= 5 && name.compare(name.size() - 5, 5, "attn1") == 0;
}

// Sinusoidal code of a (row, col) grid position, half the channels each.
Matrix grid_position_code(int rows, int cols, int dim) {
  Matrix pe(static_cast<Eigen::Index>(rows) * cols, dim);
  const int half = dim / 2;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const Eigen::Index tok = static_cast<Eigen::Index>(r) * cols + c;
      for (int i = 0; i < dim; ++i) {
        const bool use_row = i < half;
        const int j = use_row ? i : i - half;
        const int width = use_row ? half : dim - half;
        const double freq = std::pow(100.0, -static_cast<double>(j / 2 * 2) / std::max(width, 1));
        const double pos = use_row ? r : c;
        pe(tok, i) = (j % 2 == 0) ? std::sin(pos * freq) : std::cos(pos * freq);
      }
    }
  }
  return pe;
}

RowVector timestep_code(int t, int dim) {
  RowVector code(dim);
  for (int i = 0; i < dim; ++i) {
    const double freq = std::pow(10000.0, -static_cast<double>(i / 2 * 2) / dim);
    code(i) = (i % 2 == 0) ? std::sin(t * freq) : std::cos(t * freq);
  }
  return code;
}

Matrix layer_norm(const Matrix& x) {
  Matrix out = x.colwise() - x.rowwise().mean();
  const Eigen::VectorXd inv =
      ((out.array().square().rowwise().sum() / static_cast<double>(x.cols())) + 1e-5).rsqrt().matrix();
  return out.array().colwise() * inv.array();
}

class LiteUNetBackend final : public Backend {
 public:
  LiteUNetBackend(BackendKind kind, std::string source, const ToyBackendOptions& o)
      : kind_(kind), source_(std::move(source)), options_(o) {
    if (options_.layers.empty()) options_.layers = default_toy_layers();
    if (options_.view_size <= 0 || options_.latent_factor <= 0 || options_.view_size % options_.latent_factor != 0) {
      throw ValidationError("view size must be a positive multiple of the latent factor");
    }
    if (options_.latent_channels < 3) throw ValidationError("latent channels must be >= 3");
    if (options_.hidden < 2) throw ValidationError("hidden width must be >= 2");
    grid_ = options_.view_size / options_.latent_factor;
    tile_pos_ = grid_position_code(kGridRows * grid_, kGridCols * grid_, options_.hidden);
    cond_pos_ = grid_position_code(grid_, grid_, options_.hidden);
  }

  void init_random() {
    Rng rng(options_.weight_seed);
    const int c = options_.latent_channels, d = options_.hidden;
    const double s_in = 1.0 / std::sqrt(static_cast<double>(c));
    const double s_hid = 1.0 / std::sqrt(static_cast<double>(d));
    w_in_ = rng.normal_matrix(c, d, s_in);
    b_in_ = rng.normal_matrix(1, d, 0.1);
    w_cond_ = rng.normal_matrix(c, d, s_in);
    for (const auto& name : options_.layers) {
      LayerWeights lw;
      lw.wq = rng.normal_matrix(d, d, s_hid);
      lw.wk = rng.normal_matrix(d, d, s_hid);
      lw.wv = rng.normal_matrix(d, d, s_hid);
      lw.wo = rng.normal_matrix(d, d, s_hid * 0.5);
      lw.self_attention = is_self_attention(name);
      layers_.push_back(std::move(lw));
    }
    w_out_ = options_.zero_noise_prediction ? Matrix::Zero(d, c) : rng.normal_matrix(d, c, s_hid);
    // Orthonormal color basis of the toy autoencoder.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd(rng.normal_matrix(c, 3, 1.0)));
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(c, 3);
    color_basis_ = q.transpose();
  }

  void init_from(const Checkpoint& ck) {
    w_in_ = ck.get("in.weight");
    b_in_ = ck.get("in.bias");
    w_cond_ = ck.get("cond.weight");
    w_out_ = ck.get("out.weight");
    color_basis_ = ck.get("vae.color_basis");
    for (const auto& name : options_.layers) {
      LayerWeights lw;
      lw.wq = ck.get(name + ".to_q");
      lw.wk = ck.get(name + ".to_k");
      lw.wv = ck.get(name + ".to_v");
      lw.wo = ck.get(name + ".to_out");
      lw.self_attention = is_self_attention(name);
      layers_.push_back(std::move(lw));
    }
    const int c = options_.latent_channels, d = options_.hidden;
    auto expect = [&](const Matrix& m, Eigen::Index r, Eigen::Index cc, const char* what) {
      if (m.rows() != r || m.cols() != cc) throw BackendError(std::string("weight shape mismatch for ") + what);
    };
    expect(w_in_, c, d, "in.weight");
    expect(b_in_, 1, d, "in.bias");
    expect(w_cond_, c, d, "cond.weight");
    expect(w_out_, d, c, "out.weight");
    expect(color_basis_, 3, c, "vae.color_basis");
    for (const auto& lw : layers_) {
      expect(lw.wq, d, d, "to_q");
      expect(lw.wk, d, d, "to_k");
      expect(lw.wv, d, d, "to_v");
      expect(lw.wo, d, d, "to_out");
    }
  }

  Checkpoint to_checkpoint() const {
    Checkpoint ck;
    ck.meta = {{"architecture", kArchitecture},
               {"view_size", options_.view_size},
               {"latent_factor", options_.latent_factor},
               {"latent_channels", options_.latent_channels},
               {"hidden", options_.hidden},
               {"output_scale", options_.output_scale},
               {"layers", options_.layers},
               {"scheduler",
                {{"train_timesteps", scheduler_.train_timesteps()},
                 {"beta_start", scheduler_.beta_start()},
                 {"beta_end", scheduler_.beta_end()}}}};
    ck.tensors.emplace_back("in.weight", w_in_);
    ck.tensors.emplace_back("in.bias", b_in_);
    ck.tensors.emplace_back("cond.weight", w_cond_);
    ck.tensors.emplace_back("out.weight", w_out_);
    ck.tensors.emplace_back("vae.color_basis", color_basis_);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& n = options_.layers[i];
      ck.tensors.emplace_back(n + ".to_q", layers_[i].wq);
      ck.tensors.emplace_back(n + ".to_k", layers_[i].wk);
      ck.tensors.emplace_back(n + ".to_v", layers_[i].wv);
      ck.tensors.emplace_back(n + ".to_out", layers_[i].wo);
    }
    return ck;
  }

  BackendKind kind() const override { return kind_; }
  std::string weight_source() const override { return source_; }
  const std::vector<std::string>& attention_layers() const override { return options_.layers; }
  const DdimScheduler& scheduler() const override { return scheduler_; }
  int view_size() const override { return options_.view_size; }

  Image reference_tile(const Image& view) const override {
    const int s = options_.view_size;
    if (view.width != s || view.height != s || view.channels != 3) {
      throw ValidationError("reference_tile expects a preprocessed " + std::to_string(s) + "x" + std::to_string(s) +
                            " RGB view");
    }
    std::array<Image, kNumViews> views;
    const auto& poses = six_view_poses();
    for (int i = 0; i < kNumViews; ++i) {
      // Each cell is the input rolled horizontally by its azimuth.
      const int shift = static_cast<int>(std::lround(poses[i].azimuth_deg / 360.0 * s)) % s;
      Image v(s, s, 3);
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x)
          for (int c = 0; c < 3; ++c) v.at((x + shift) % s, y, c) = view.at(x, y, c);
      views[i] = std::move(v);
    }
    return tile_views(views);
  }

  Matrix encode(const Image& tile) const override {
    const int s = options_.view_size;
    if (tile.width != kGridCols * s || tile.height != kGridRows * s || tile.channels != 3) {
      throw ValidationError("encode expects a " + std::to_string(kGridCols * s) + "x" +
                            std::to_string(kGridRows * s) + " RGB tile");
    }
    return pool_encode(tile);
  }

  Image decode(const Matrix& latent) const override {
    const int rows = kGridRows * grid_, cols = kGridCols * grid_, f = options_.latent_factor;
    if (latent.rows() != static_cast<Eigen::Index>(rows) * cols || latent.cols() != options_.latent_channels) {
      throw ValidationError("decode: latent shape " + shape_string(latent) + " does not match the backend");
    }
    const Matrix rgb = ((latent * color_basis_.transpose()).array() + 1.0) * 0.5;
    Image out(cols * f, rows * f, 3);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        for (int y = 0; y < f; ++y)
          for (int x = 0; x < f; ++x)
            for (int ch = 0; ch < 3; ++ch)
              out.at(c * f + x, r * f + y, ch) = std::clamp(rgb(r * cols + c, ch), 0.0, 1.0);
    return out;
  }

  Matrix condition(const Image& view) const override {
    const int s = options_.view_size;
    if (view.width != s || view.height != s || view.channels != 3) {
      throw ValidationError("condition expects a preprocessed " + std::to_string(s) + "x" + std::to_string(s) +
                            " RGB view");
    }
    return pool_encode(view);
  }

  Matrix predict_noise(const Matrix& latent, int timestep, int step, const Matrix& conditioning,
                       AttentionProcessor& attention) const override {
    if (latent.rows() != tile_pos_.rows() || latent.cols() != options_.latent_channels) {
      throw ValidationError("predict_noise: latent shape " + shape_string(latent) + " does not match the backend");
    }
    if (conditioning.rows() != cond_pos_.rows() || conditioning.cols() != options_.latent_channels) {
      throw ValidationError("predict_noise: conditioning shape " + shape_string(conditioning) +
                            " does not match the backend");
    }
    Matrix h = latent * w_in_ + tile_pos_;
    h.rowwise() += b_in_.row(0) + timestep_code(timestep, options_.hidden);
    const Matrix context = conditioning * w_cond_ + cond_pos_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const LayerWeights& lw = layers_[i];
      const Matrix n = layer_norm(h);
      const Matrix q = n * lw.wq;
      const Matrix& kv_source = lw.self_attention ? n : context;
      const Matrix k = kv_source * lw.wk;
      const Matrix v = kv_source * lw.wv;
      const AttentionCall call{options_.layers[i], step, lw.self_attention, q, k, v};
      const Matrix a = attention.process(call);
      if (a.rows() != h.rows() || a.cols() != options_.hidden) {
        throw ValidationError("attention processor returned " + shape_string(a) + " for layer " + options_.layers[i]);
      }
      h += a * lw.wo;
    }
    return options_.output_scale * (layer_norm(h) * w_out_);
  }

 private:
  Matrix pool_encode(const Image& img) const {
    const int f = options_.latent_factor;
    const int rows = img.height / f, cols = img.width / f;
    Matrix rgb(static_cast<Eigen::Index>(rows) * cols, 3);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        for (int ch = 0; ch < 3; ++ch) {
          double acc = 0.0;
          for (int y = 0; y < f; ++y)
            for (int x = 0; x < f; ++x) acc += img.at(c * f + x, r * f + y, ch);
          rgb(r * cols + c, ch) = acc / (f * f) * 2.0 - 1.0;
        }
      }
    }
    return rgb * color_basis_;
  }

  BackendKind kind_;
  std::string source_;
  ToyBackendOptions options_;
  DdimScheduler scheduler_;
  int grid_ = 0;
  Matrix tile_pos_, cond_pos_;
  Matrix w_in_, b_in_, w_cond_, w_out_, color_basis_;
  std::vector<LayerWeights> layers_;
};

}  // namespace

const char* to_string(BackendKind kind) { return kind == BackendKind::toy ? "toy" : "pretrained"; }

Matrix NativeAttention::process(const AttentionCall& call) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(call.query.cols()));
  return attn::attention_weights(call.query, call.key, scale) * call.value;
}

const std::vector<std::string>& default_toy_layers() {
  static const std::vector<std::string> layers = {
      "down_blocks.0.attentions.0.transformer_blocks.0.attn1",
      "down_blocks.0.attentions.0.transformer_blocks.0.attn2",
      "mid_block.attentions.0.transformer_blocks.0.attn1",
      "mid_block.attentions.0.transformer_blocks.0.attn2",
      "up_blocks.3.attentions.0.transformer_blocks.0.attn1",
      "up_blocks.3.attentions.0.transformer_blocks.0.attn2",
      "up_blocks.3.attentions.1.transformer_blocks.0.attn1",
      "up_blocks.3.attentions.1.transformer_blocks.0.attn2",
      "up_blocks.3.attentions.2.transformer_blocks.0.attn1",
      "up_blocks.3.attentions.2.transformer_blocks.0.attn2",
  };
  return layers;
}

std::shared_ptr<const Backend> make_toy_backend(const ToyBackendOptions& options) {
  auto backend = std::make_shared<LiteUNetBackend>(BackendKind::toy, "toy:seed=" + std::to_string(options.weight_seed),
                                                   options);
  backend->init_random();
  return backend;
}

void save_backend_weights(const Backend& backend, const std::filesystem::path& path) {
  const auto* lite = dynamic_cast<const LiteUNetBackend*>(&backend);
  if (lite == nullptr) throw ValidationError("save_backend_weights: unsupported backend implementation");
  save_checkpoint(path, lite->to_checkpoint());
}

std::shared_ptr<const Backend> load_pretrained_backend(const std::filesystem::path& weights) {
  if (!std::filesystem::exists(weights)) {
    throw BackendError("pretrained backend weights not found at " + weights.string() +
                       " (pass --weights or set STYLE3D_CACHE)");
  }
  Checkpoint ck;
  try {
    ck = load_checkpoint(weights);
  } catch (const Error& e) {
    throw BackendError("cannot load backend weights from " + weights.string() + ": " + e.what());
  }
  if (ck.meta.value("architecture", std::string()) != kArchitecture) {
    throw BackendError("backend weights at " + weights.string() + " are not a '" + kArchitecture + "' checkpoint");
  }
  ToyBackendOptions o;
  try {
    o.view_size = ck.meta.at("view_size").get<int>();
    o.latent_factor = ck.meta.at("latent_factor").get<int>();
    o.latent_channels = ck.meta.at("latent_channels").get<int>();
    o.hidden = ck.meta.at("hidden").get<int>();
    o.output_scale = ck.meta.at("output_scale").get<double>();
    o.layers = ck.meta.at("layers").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw BackendError("backend weights at " + weights.string() + " have an incomplete manifest: " + e.what());
  }
  std::vector<std::string> missing;
  for (const auto& name : attn::default_fusion_layers()) {
    if (std::find(o.layers.begin(), o.layers.end(), name) == o.layers.end()) missing.push_back(name);
  }
  if (!missing.empty()) {
    std::string msg = "backend weights at " + weights.string() + " lack required attention layers:";
    for (const auto& m : missing) msg += " " + m;
    throw BackendError(msg);
  }
  try {
    auto backend = std::make_shared<LiteUNetBackend>(BackendKind::pretrained, weights.string(), o);
    backend->init_from(ck);
    return backend;
  } catch (const BackendError&) {
    throw;
  } catch (const Error& e) {
    throw BackendError("backend weights at " + weights.string() + " are invalid: " + e.what());
  }
}

std::filesystem::path resolve_weight_path(const std::optional<std::filesystem::path>& explicit_path) {
  if (explicit_path) return *explicit_path;
  if (const char* cache = std::getenv("STYLE3D_CACHE"); cache != nullptr && *cache != '\0') {
    return std::filesystem::path(cache) / "mv_backend.s3d";
  }
  const char* home = std::getenv("HOME");
  return std::filesystem::path(home ? home : ".") / ".cache" / "style3d" / "mv_backend.s3d";
}

}  // namespace style3d::diffusion
