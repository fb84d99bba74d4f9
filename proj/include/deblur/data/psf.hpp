#pragma once

#include <cstdint>
#include <vector>

#include "deblur/core/tensor.hpp"

namespace deblur {

// Normalized line-segment blur kernel. `kernel` is size x size row-major,
// non-negative, summing to 1.
struct MotionPSF {
  double length = 1.0;
  double angle_deg = 0.0;
  std::int64_t size = 1;
  std::vector<double> kernel;
};

// Anti-aliased line kernel: unit mass distributed along a centered segment
// of the given length, rotated by `angle_deg`, rasterized onto a
// (2*ceil(length/2)+1)^2 grid by dense point sampling along the segment.
MotionPSF make_psf(double length, double angle_deg);

// Per-channel 2-D convolution with reflect padding; output shape equals
// input shape.
Tensor apply_blur(const Tensor& image, const MotionPSF& psf);

}  // namespace deblur
