#pragma once

#include <cstdint>
#include <vector>

namespace style3d {

// Interleaved raster with channel values nominally in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0);

  bool empty() const { return pixels.empty(); }
  double& at(int x, int y, int c) { return pixels[index(x, y, c)]; }
  double at(int x, int y, int c) const { return pixels[index(x, y, c)]; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
};

// RGBA composited over a white background; RGB passes through, gray expands.
Image to_rgb_over_white(const Image& img);

// Pads the shorter side with `fill` so the content stays centered.
Image pad_to_square(const Image& img, double fill = 1.0);

// Exact box-filter resampling (each output pixel averages the input area it covers).
Image resize_area(const Image& img, int width, int height);

Image crop(const Image& img, int x0, int y0, int width, int height);
void paste(Image& dst, const Image& src, int x0, int y0);

// Values rounded to the 8-bit grid, which is what a PNG round trip keeps.
Image quantize8(const Image& img);
std::vector<std::uint8_t> to_bytes(const Image& img);

// RGB of any channel count normalized to a square model input of side `size`.
Image preprocess_for_model(const Image& img, int size);

}  // namespace style3d
