#pragma once

#include "style3d/image.hpp"

#include <filesystem>

namespace style3d {

// Decodes PNG (gray, gray+alpha, RGB, RGBA) or JPEG, chosen by file signature.
Image read_image(const std::filesystem::path& path);

// 8-bit PNG with the image's channel count (1, 2, 3 or 4). Output bytes are a
// pure function of the pixel values.
void write_png(const std::filesystem::path& path, const Image& img);

// Portable float map: 1 channel ("Pf") or 3 channels ("PF"), little endian,
// rows stored bottom-to-top per the format.
void write_pfm(const std::filesystem::path& path, const Image& img);
Image read_pfm(const std::filesystem::path& path);

}  // namespace style3d
