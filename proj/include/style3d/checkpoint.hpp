#pragma once

#include "style3d/tensor.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace style3d {

// Self-describing weight container:
//   8 bytes   magic "S3DCKPT1"
//   8 bytes   little-endian u64 header length
//   N bytes   JSON header {"meta": {...}, "tensors": [{"name","rows","cols","offset"}]}
//   payload   little-endian float64 values, row-major, at the listed offsets
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Matrix>> tensors;

  const Matrix& get(const std::string& name) const;
  bool contains(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace style3d
