#include "style3d/diffusion/view_grid.hpp"

#include "style3d/error.hpp"
#include "style3d/image_io.hpp"

#include <fstream>

namespace style3d::diffusion {

Image tile_views(std::span<const Image> views) {
  if (views.size() != kNumViews) {
    throw ValidationError("tile_views needs exactly six views, got " + std::to_string(views.size()));
  }
  const Image& first = views[0];
  for (const Image& v : views) {
    if (v.width != first.width || v.height != first.height || v.channels != first.channels) {
      throw ValidationError("tile_views: all views must share one size");
    }
  }
  Image tile(first.width * kGridCols, first.height * kGridRows, first.channels);
  for (int i = 0; i < kNumViews; ++i) {
    paste(tile, views[i], (i % kGridCols) * first.width, (i / kGridCols) * first.height);
  }
  return tile;
}

std::array<Image, kNumViews> untile_views(const Image& tile) {
  if (tile.width <= 0 || tile.height <= 0 || tile.width % kGridCols != 0 || tile.height % kGridRows != 0) {
    throw ValidationError("tile of " + std::to_string(tile.width) + "x" + std::to_string(tile.height) +
                          " does not split into a 3x2 grid");
  }
  const int w = tile.width / kGridCols, h = tile.height / kGridRows;
  std::array<Image, kNumViews> views;
  for (int i = 0; i < kNumViews; ++i) views[i] = crop(tile, (i % kGridCols) * w, (i / kGridCols) * h, w, h);
  return views;
}

ViewGrid make_view_grid(Image tile, std::uint64_t seed) {
  ViewGrid grid;
  grid.views = untile_views(tile);
  grid.tile = std::move(tile);
  grid.poses = six_view_poses();
  grid.seed = seed;
  return grid;
}

nlohmann::json poses_to_json(const ViewGrid& grid) {
  nlohmann::json views = nlohmann::json::array();
  for (int i = 0; i < kNumViews; ++i) {
    const CameraPose& p = grid.poses[i];
    views.push_back({{"index", i},
                     {"file", "view_" + std::to_string(i) + ".png"},
                     {"elevation_deg", p.elevation_deg},
                     {"azimuth_deg", p.azimuth_deg},
                     {"radius", p.radius},
                     {"fov_deg", p.fov_deg},
                     {"width", grid.views[i].width},
                     {"height", grid.views[i].height}});
  }
  return {{"layout", "3x2"}, {"seed", grid.seed}, {"views", views}};
}

std::vector<std::filesystem::path> save_view_grid(const ViewGrid& grid, const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> written;
  std::filesystem::create_directories(dir);
  write_png(dir / "views.png", grid.tile);
  written.push_back(dir / "views.png");
  for (int i = 0; i < kNumViews; ++i) {
    const auto path = dir / ("view_" + std::to_string(i) + ".png");
    write_png(path, grid.views[i]);
    written.push_back(path);
  }
  std::ofstream out(dir / "poses.json");
  out << poses_to_json(grid).dump(2) << "\n";
  if (!out) throw Error("cannot write " + (dir / "poses.json").string());
  written.push_back(dir / "poses.json");
  return written;
}

}  // namespace style3d::diffusion
