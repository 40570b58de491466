#pragma once

// Joint image/text embedding behind a cosine-similarity contract.

#include "style3d/image.hpp"

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <vector>

namespace style3d::eval {

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string name() const = 0;
  // Unit-norm embeddings in a shared space.
  virtual Eigen::VectorXd embed_image(const Image& img) const = 0;
  virtual Eigen::VectorXd embed_text(const std::string& text) const = 0;
};

// Deterministic CPU embedder: coarse color layout plus a named-color
// histogram for images; prompts map color words onto the same features.
// Prompts without any known color word get a hashed pseudo-random vector.
class StubEmbedder final : public Embedder {
 public:
  std::string name() const override { return "stub-color-v1"; }
  Eigen::VectorXd embed_image(const Image& img) const override;
  Eigen::VectorXd embed_text(const std::string& text) const override;

  static constexpr int kLayout = 4;  // layout cells per side
  static int dimension();
};

// Color words the stub understands, in histogram bin order.
const std::vector<std::string>& stub_color_vocabulary();

// "stub" or "clip". There is no CLIP model in this build, so "clip" throws
// BackendError rather than substituting the stub. Unknown names throw
// ValidationError.
std::shared_ptr<const Embedder> make_embedder(const std::string& name);

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace style3d::eval
