#pragma once

#include "style3d/camera_pose.hpp"
#include "style3d/image.hpp"

#include <filesystem>
#include <vector>

namespace style3d::recon {

// Posed views with their supervision rasters. Depths and normals are optional
// (both or neither); normals are world-space unit vectors.
struct PosedViewBatch {
  std::vector<Image> images;  // RGB
  std::vector<Image> masks;   // one channel, 0 or 1
  std::vector<Image> depths;  // one channel, camera depth
  std::vector<Image> normals;  // three channels
  std::vector<CameraPose> cameras;

  int size() const { return static_cast<int>(images.size()); }
  int width() const { return images.empty() ? 0 : images.front().width; }
  int height() const { return images.empty() ? 0 : images.front().height; }
  bool has_geometry() const { return !depths.empty(); }

  // Throws ValidationError on empty batches, count or resolution mismatches,
  // wrong channel counts, non-binary masks or non-finite values.
  void validate() const;
};

// Mask from a view rendered over white: 1 where any channel is darker than
// 1 - threshold.
Image mask_from_white_background(const Image& rgb, double threshold = 0.02);

// Layout: rgb_<i>.png, mask_<i>.png, depth_<i>.pfm, normal_<i>.pfm, cameras.json.
void save_supervision(const std::filesystem::path& dir, const PosedViewBatch& batch);
PosedViewBatch load_supervision(const std::filesystem::path& dir);

}  // namespace style3d::recon
