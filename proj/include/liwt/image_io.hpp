#pragma once

// 8-bit PNG input and output for H x W x 3 images with values in [0, 1].

#include <string>

#include "liwt/tensor.hpp"

namespace liwt {

// Decodes any 8/16-bit gray, palette, RGB or RGBA PNG to RGB by v / 255
// (16-bit samples are reduced to 8 bits first; alpha is dropped).
// Throws ImageError naming the path.
Tensorf load_png(const std::string& path);

// Clamps to [0, 1] and rounds to the nearest 8-bit level.
void save_png(const std::string& path, const Tensorf& rgb);

// H x W single-channel (or H x W x 1) image in [0, 1].
void save_gray_png(const std::string& path, const Tensorf& gray);

std::uint8_t quantize(float v);

}  // namespace liwt
