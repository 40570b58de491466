#pragma once

#include "style3d/pipeline/pipeline.hpp"

#include <chrono>

namespace style3d::pipeline::detail {

class Stopwatch {
 public:
  double lap();

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

struct RunOutput {
  RunReport report;
  Image tile;
};

// Generation, reconstruction, extraction and persistence for one config
// against an already captured bank.
RunOutput run_with_bank(const RunConfig& cfg, const Image& content, const diffusion::FeatureBank& bank,
                        const diffusion::Backend& backend, std::vector<std::pair<std::string, double>> timings);

}  // namespace style3d::pipeline::detail
