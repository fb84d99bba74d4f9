#pragma once

#include <string>

#include "deblur/core/tensor.hpp"

namespace deblur {

// Binary PPM (P6, 3 channels) and PGM (P5, 1 channel), 8-bit, maxval 255.
// Pixel p maps to 2*(p/255) - 1; saving inverts with round-half-away-from-
// zero and clamps to [0, 255]. Writers emit the canonical header
// "P6\n<w> <h>\n255\n" so save(load(f)) is byte-identical for files written
// by this module.
Tensor load_image(const std::string& path);
void save_image(const std::string& path, const Tensor& image);

}  // namespace deblur
