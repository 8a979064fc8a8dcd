#pragma once

#include <string>

#include "deflare/tensor.hpp"

namespace deflare {

// Reads an 8-bit PNG as a 3 x H x W tensor in [0,1]; grayscale files are
// expanded to three channels. Throws std::runtime_error on I/O failure.
Tensor read_png(const std::string& path);

// Writes a 3-channel RGB or 1-channel grayscale tensor as an 8-bit PNG.
// Values are clamped to [0,1] and rounded to 255 levels.
void write_png(const std::string& path, const Tensor& img);

}  // namespace deflare
