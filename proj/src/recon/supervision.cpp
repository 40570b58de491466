#include "style3d/recon/supervision.hpp"

#include "style3d/error.hpp"
#include "style3d/image_io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace style3d::recon {
namespace {

void check_raster(const Image& img, int w, int h, int c, const std::string& what, int i) {
  if (img.width != w || img.height != h || img.channels != c) {
    throw ValidationError(what + " " + std::to_string(i) + " is " + std::to_string(img.width) + "x" +
                          std::to_string(img.height) + "x" + std::to_string(img.channels) + ", expected " +
                          std::to_string(w) + "x" + std::to_string(h) + "x" + std::to_string(c));
  }
  for (double v : img.pixels)
    if (!std::isfinite(v)) throw ValidationError(what + " " + std::to_string(i) + " has non-finite values");
}

std::string indexed(const std::string& stem, int i, const std::string& ext) {
  return stem + "_" + std::to_string(i) + ext;
}

}  // namespace

void PosedViewBatch::validate() const {
  const int n = size();
  if (n < 1) throw ValidationError("view batch is empty");
  if (static_cast<int>(masks.size()) != n || static_cast<int>(cameras.size()) != n) {
    throw ValidationError("view batch needs one mask and one camera per image");
  }
  if (depths.size() != normals.size() || (!depths.empty() && static_cast<int>(depths.size()) != n)) {
    throw ValidationError("depth and normal supervision must both be present for every view or absent");
  }
  const int w = width(), h = height();
  if (w < 1 || h < 1) throw ValidationError("view batch rasters are empty");
  for (int i = 0; i < n; ++i) {
    check_raster(images[i], w, h, 3, "image", i);
    check_raster(masks[i], w, h, 1, "mask", i);
    for (double v : masks[i].pixels)
      if (v != 0.0 && v != 1.0) throw ValidationError("mask " + std::to_string(i) + " is not binary");
    if (has_geometry()) {
      check_raster(depths[i], w, h, 1, "depth", i);
      check_raster(normals[i], w, h, 3, "normal", i);
    }
  }
}

Image mask_from_white_background(const Image& rgb, double threshold) {
  Image m(rgb.width, rgb.height, 1);
  for (int y = 0; y < rgb.height; ++y)
    for (int x = 0; x < rgb.width; ++x) {
      bool fg = false;
      for (int c = 0; c < rgb.channels; ++c) fg = fg || rgb.at(x, y, c) < 1.0 - threshold;
      m.at(x, y, 0) = fg ? 1.0 : 0.0;
    }
  return m;
}

void save_supervision(const std::filesystem::path& dir, const PosedViewBatch& batch) {
  batch.validate();
  std::filesystem::create_directories(dir);
  nlohmann::json cams = nlohmann::json::array();
  for (int i = 0; i < batch.size(); ++i) {
    write_png(dir / indexed("rgb", i, ".png"), batch.images[i]);
    write_png(dir / indexed("mask", i, ".png"), batch.masks[i]);
    if (batch.has_geometry()) {
      write_pfm(dir / indexed("depth", i, ".pfm"), batch.depths[i]);
      write_pfm(dir / indexed("normal", i, ".pfm"), batch.normals[i]);
    }
    const CameraPose& p = batch.cameras[i];
    cams.push_back({{"elevation_deg", p.elevation_deg},
                    {"azimuth_deg", p.azimuth_deg},
                    {"radius", p.radius},
                    {"fov_deg", p.fov_deg}});
  }
  std::ofstream(dir / "cameras.json") << nlohmann::json{{"views", cams}}.dump(2) << "\n";
}

PosedViewBatch load_supervision(const std::filesystem::path& dir) {
  std::ifstream in(dir / "cameras.json");
  if (!in) throw ValidationError("missing camera manifest " + (dir / "cameras.json").string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw ValidationError("malformed camera manifest: " + std::string(e.what()));
  }
  PosedViewBatch batch;
  const auto& views = doc.at("views");
  for (std::size_t i = 0; i < views.size(); ++i) {
    const int k = static_cast<int>(i);
    const auto& v = views[i];
    batch.cameras.push_back({v.at("elevation_deg").get<double>(), v.at("azimuth_deg").get<double>(),
                             v.at("radius").get<double>(), v.at("fov_deg").get<double>()});
    batch.images.push_back(to_rgb_over_white(read_image(dir / indexed("rgb", k, ".png"))));
    Image mask = read_image(dir / indexed("mask", k, ".png"));
    Image m1(mask.width, mask.height, 1);
    for (int y = 0; y < mask.height; ++y)
      for (int x = 0; x < mask.width; ++x) m1.at(x, y, 0) = mask.at(x, y, 0) >= 0.5 ? 1.0 : 0.0;
    batch.masks.push_back(std::move(m1));
    if (std::filesystem::exists(dir / indexed("depth", k, ".pfm"))) {
      batch.depths.push_back(read_pfm(dir / indexed("depth", k, ".pfm")));
      batch.normals.push_back(read_pfm(dir / indexed("normal", k, ".pfm")));
    }
  }
  batch.validate();
  return batch;
}

}  // namespace style3d::recon
