#pragma once

#include "style3d/image.hpp"

#include <string>

namespace style3d::pipeline {

// 5x7 bitmap glyphs on a 6-pixel advance. Covers digits, lowercase letters
// and ". , ( ) = - _ :"; other characters render as blanks.
inline constexpr int kGlyphWidth = 5;
inline constexpr int kGlyphHeight = 7;
inline constexpr int kGlyphAdvance = 6;

int label_width(const std::string& text, int scale = 1);

// Draws black text with its top-left corner at (x, y); clipped to the image.
void draw_label(Image& img, int x, int y, const std::string& text, int scale = 1);

}  // namespace style3d::pipeline
