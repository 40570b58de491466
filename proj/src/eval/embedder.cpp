#include "style3d/eval/embedder.hpp"

#include "style3d/error.hpp"
#include "style3d/json_fixed.hpp"
#include "style3d/rng.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <sstream>

namespace style3d::eval {
namespace {

struct NamedColor {
  const char* name;
  std::array<double, 3> rgb;
};

constexpr std::array<NamedColor, 12> kPalette{{
    {"red", {0.85, 0.10, 0.10}},
    {"orange", {0.95, 0.55, 0.10}},
    {"yellow", {0.95, 0.90, 0.15}},
    {"green", {0.15, 0.70, 0.20}},
    {"cyan", {0.10, 0.80, 0.85}},
    {"blue", {0.10, 0.20, 0.85}},
    {"purple", {0.55, 0.15, 0.75}},
    {"pink", {0.95, 0.55, 0.75}},
    {"brown", {0.50, 0.30, 0.12}},
    {"white", {0.97, 0.97, 0.97}},
    {"gray", {0.50, 0.50, 0.50}},
    {"black", {0.05, 0.05, 0.05}},
}};

// Histogram features are scaled up so a single dominant color weighs about
// as much as the layout block.
constexpr double kHistogramScale = 3.0;

constexpr int kLayoutDims = StubEmbedder::kLayout * StubEmbedder::kLayout * 3;

int nearest_color(double r, double g, double b) {
  int best = 0;
  double best_d = 1e300;
  for (int i = 0; i < static_cast<int>(kPalette.size()); ++i) {
    const auto& c = kPalette[i].rgb;
    const double d = (r - c[0]) * (r - c[0]) + (g - c[1]) * (g - c[1]) + (b - c[2]) * (b - c[2]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

Eigen::VectorXd normalized(Eigen::VectorXd v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw NumericalError("embedding has zero or non-finite norm");
  return v / n;
}

const std::vector<std::string> kAliases[] = {{"crimson", "scarlet"}, {"amber"}, {"gold", "golden"},
                                             {"emerald", "forest"},  {"teal"},  {"navy", "azure"},
                                             {"violet", "lavender"}, {"rose"},  {"wooden", "wood"},
                                             {"snow"},               {"grey", "silver", "stone"},
                                             {"dark", "ink"}};

int color_of_word(const std::string& w) {
  for (int i = 0; i < static_cast<int>(kPalette.size()); ++i) {
    if (w == kPalette[i].name) return i;
    for (const auto& a : kAliases[i])
      if (w == a) return i;
  }
  return -1;
}

}  // namespace

int StubEmbedder::dimension() { return kLayoutDims + static_cast<int>(kPalette.size()); }

const std::vector<std::string>& stub_color_vocabulary() {
  static const std::vector<std::string> vocab = [] {
    std::vector<std::string> v;
    for (const auto& c : kPalette) v.emplace_back(c.name);
    return v;
  }();
  return vocab;
}

Eigen::VectorXd StubEmbedder::embed_image(const Image& img) const {
  if (img.empty() || img.width <= 0 || img.height <= 0) throw ValidationError("cannot embed an empty image");
  const Image small = resize_area(to_rgb_over_white(img), 32, 32);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dimension());
  const int cell = 32 / kLayout;
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      const int k = (y / cell) * kLayout + x / cell;
      for (int c = 0; c < 3; ++c) v[k * 3 + c] += small.at(x, y, c) - 0.5;
      v[kLayoutDims + nearest_color(small.at(x, y, 0), small.at(x, y, 1), small.at(x, y, 2))] += 1.0;
    }
  }
  v.head(kLayoutDims) /= static_cast<double>(cell * cell);
  v.tail(kPalette.size()) *= kHistogramScale / (32.0 * 32.0);
  return normalized(v);
}

Eigen::VectorXd StubEmbedder::embed_text(const std::string& text) const {
  std::string lowered;
  for (char ch : text) lowered += std::isalpha(static_cast<unsigned char>(ch)) ? static_cast<char>(std::tolower(ch)) : ' ';
  std::istringstream words(lowered);
  std::vector<int> hits;
  for (std::string w; words >> w;) {
    const int c = color_of_word(w);
    if (c >= 0) hits.push_back(c);
  }
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dimension());
  if (hits.empty()) {
    Rng rng(fnv1a64(lowered));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
    return normalized(v);
  }
  const double share = 1.0 / static_cast<double>(hits.size());
  for (int c : hits) {
    for (int k = 0; k < kLayout * kLayout; ++k)
      for (int ch = 0; ch < 3; ++ch) v[k * 3 + ch] += share * (kPalette[c].rgb[ch] - 0.5);
    v[kLayoutDims + c] += share * kHistogramScale;
  }
  return normalized(v);
}

std::shared_ptr<const Embedder> make_embedder(const std::string& name) {
  if (name == "stub") return std::make_shared<StubEmbedder>();
  if (name == "clip") {
    throw BackendError("embedding backend 'clip' is not available in this build; use --embedder stub");
  }
  throw ValidationError("unknown embedder '" + name + "' (expected stub or clip)");
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw ValidationError("embedding size mismatch");
  const double d = a.norm() * b.norm();
  if (!(d > 0.0)) throw NumericalError("cosine of a zero embedding");
  return std::clamp(a.dot(b) / d, -1.0, 1.0);
}

}  // namespace style3d::eval
