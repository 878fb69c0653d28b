#pragma once

#include <string>
#include <vector>

#include "latdream/envs/env.hpp"

namespace latdream {

// Minimal RGB8 PNG writer (zlib-deflated, filter 0).
void write_png(const std::string& path, const uint8_t* rgb_interleaved,
               int width, int height);

void write_png(const std::string& path, const ImageU8& img);

// Compose images (all same size) into a grid with a 2px separator.
ImageU8 image_grid(const std::vector<ImageU8>& frames, int cols);

}  // namespace latdream
