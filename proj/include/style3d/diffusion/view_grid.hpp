#pragma once

#include "style3d/camera_pose.hpp"
#include "style3d/image.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>

namespace style3d::diffusion {

inline constexpr int kGridRows = 3;
inline constexpr int kGridCols = 2;
inline constexpr int kNumViews = kGridRows * kGridCols;

// Six generated views in the backend's 3x2 layout. View i sits at row i / 2,
// column i % 2.
struct ViewGrid {
  Image tile;
  std::array<Image, kNumViews> views;
  std::array<CameraPose, kNumViews> poses;
  std::uint64_t seed = 0;
};

// Six equally sized rasters to one (3h x 2w) tile.
Image tile_views(std::span<const Image> views);
// Inverse of tile_views; the tile must split evenly into the 3x2 grid.
std::array<Image, kNumViews> untile_views(const Image& tile);

ViewGrid make_view_grid(Image tile, std::uint64_t seed);

nlohmann::json poses_to_json(const ViewGrid& grid);

// Writes views.png, view_0.png .. view_5.png and poses.json; returns the paths written.
std::vector<std::filesystem::path> save_view_grid(const ViewGrid& grid, const std::filesystem::path& dir);

}  // namespace style3d::diffusion
