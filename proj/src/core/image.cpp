#include "style3d/image.hpp"

#include "style3d/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace style3d {

Image::Image(int w, int h, int c, double fill)
    : width(w), height(h), channels(c),
      pixels(static_cast<std::size_t>(w) * h * c, fill) {
  if (w <= 0 || h <= 0 || c <= 0) {
    throw ValidationError("image dimensions must be positive, got " + std::to_string(w) + "x" +
                          std::to_string(h) + "x" + std::to_string(c));
  }
}

Image to_rgb_over_white(const Image& img) {
  if (img.channels == 3) return img;
  Image out(img.width, img.height, 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      switch (img.channels) {
        case 1:
        case 2: {
          const double a = img.channels == 2 ? img.at(x, y, 1) : 1.0;
          const double g = img.at(x, y, 0) * a + (1.0 - a);
          for (int c = 0; c < 3; ++c) out.at(x, y, c) = g;
          break;
        }
        case 4: {
          const double a = img.at(x, y, 3);
          for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(x, y, c) * a + (1.0 - a);
          break;
        }
        default:
          throw ValidationError("unsupported channel count " + std::to_string(img.channels));
      }
    }
  }
  return out;
}

Image pad_to_square(const Image& img, double fill) {
  const int side = std::max(img.width, img.height);
  if (img.width == side && img.height == side) return img;
  Image out(side, side, img.channels, fill);
  paste(out, img, (side - img.width) / 2, (side - img.height) / 2);
  return out;
}

Image resize_area(const Image& img, int width, int height) {
  if (img.width == width && img.height == height) return img;
  Image out(width, height, img.channels);
  const double sx = static_cast<double>(img.width) / width;
  const double sy = static_cast<double>(img.height) / height;
  std::vector<double> acc(img.channels);
  for (int oy = 0; oy < height; ++oy) {
    const double y0 = oy * sy, y1 = (oy + 1) * sy;
    for (int ox = 0; ox < width; ++ox) {
      const double x0 = ox * sx, x1 = (ox + 1) * sx;
      std::fill(acc.begin(), acc.end(), 0.0);
      double total = 0.0;
      for (int iy = static_cast<int>(std::floor(y0)); iy < std::min<double>(std::ceil(y1), img.height); ++iy) {
        const double wy = std::min<double>(iy + 1, y1) - std::max<double>(iy, y0);
        if (wy <= 0) continue;
        for (int ix = static_cast<int>(std::floor(x0)); ix < std::min<double>(std::ceil(x1), img.width); ++ix) {
          const double wx = std::min<double>(ix + 1, x1) - std::max<double>(ix, x0);
          if (wx <= 0) continue;
          const double w = wx * wy;
          total += w;
          for (int c = 0; c < img.channels; ++c) acc[c] += w * img.at(ix, iy, c);
        }
      }
      for (int c = 0; c < img.channels; ++c) out.at(ox, oy, c) = acc[c] / total;
    }
  }
  return out;
}

Image crop(const Image& img, int x0, int y0, int width, int height) {
  if (x0 < 0 || y0 < 0 || x0 + width > img.width || y0 + height > img.height) {
    throw ValidationError("crop window outside image");
  }
  Image out(width, height, img.channels);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(x0 + x, y0 + y, c);
  return out;
}

void paste(Image& dst, const Image& src, int x0, int y0) {
  if (src.channels != dst.channels) throw ValidationError("paste: channel mismatch");
  if (x0 < 0 || y0 < 0 || x0 + src.width > dst.width || y0 + src.height > dst.height) {
    throw ValidationError("paste window outside destination");
  }
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x)
      for (int c = 0; c < src.channels; ++c) dst.at(x0 + x, y0 + y, c) = src.at(x, y, c);
}

Image quantize8(const Image& img) {
  Image out = img;
  for (double& v : out.pixels) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  return out;
}

std::vector<std::uint8_t> to_bytes(const Image& img) {
  std::vector<std::uint8_t> bytes(img.pixels.size());
  std::transform(img.pixels.begin(), img.pixels.end(), bytes.begin(), [](double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  });
  return bytes;
}

Image preprocess_for_model(const Image& img, int size) {
  return resize_area(pad_to_square(to_rgb_over_white(img), 1.0), size, size);
}

}  // namespace style3d
