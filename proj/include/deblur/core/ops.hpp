#pragma once

#include <optional>

#include "deblur/core/tensor.hpp"

namespace deblur {

// --- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, float s);
Tensor add_scalar(const Tensor& x, float s);
// x^p elementwise; for fractional p the input must be positive.
Tensor pow_scalar(const Tensor& x, float p);
Tensor abs(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, float slope);
Tensor tanh(const Tensor& x);

// --- shape-changing linear ops (each is the adjoint of its partner) --------

Tensor reflect_pad2d(const Tensor& x, std::int64_t pad);

Tensor sum_spatial(const Tensor& x);                                 // NxCxHxW -> NxCx1x1
Tensor broadcast_spatial(const Tensor& s, std::int64_t h, std::int64_t w);
Tensor sum_channel(const Tensor& x);                                 // NxCxHxW -> 1xCx1x1
Tensor broadcast_channel(const Tensor& v, const Shape& target);
Tensor sum_per_sample(const Tensor& x);                              // NxCxHxW -> Nx1x1x1
Tensor broadcast_per_sample(const Tensor& s, const Shape& target);
Tensor sum_all(const Tensor& x);                                     // -> 1x1x1x1
Tensor broadcast_all(const Tensor& s, const Shape& target);

// --- reductions (compositions) ----------------------------------------------

Tensor mean_all(const Tensor& x);
Tensor l1_mean(const Tensor& a, const Tensor& b);  // mean |a - b|
Tensor mse(const Tensor& a, const Tensor& b);      // mean (a - b)^2

// --- convolution ------------------------------------------------------------

enum class PadMode { kZero, kReflect };

struct PadSpec {
  PadMode mode = PadMode::kZero;
  std::int64_t size = 0;
};

// Cross-correlation (no kernel flip). weight is Cout x Cin x Kh x Kw.
Tensor conv2d(const Tensor& input, const Tensor& weight,
              const std::optional<Tensor>& bias, std::int64_t stride, PadSpec padding);

// Adjoint of conv2d in its input; weight is Cin x Cout x Kh x Kw seen from
// this op's direction. Output spatial size (H-1)*stride - 2*pad + K + output_pad.
Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, std::int64_t stride,
                        std::int64_t padding, std::int64_t output_padding = 0);

// Per-sample, per-channel standardization over HxW, with affine parameters.
// gamma/beta are 1xCx1x1.
Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                     float epsilon = 1e-5f);

// --- misc -------------------------------------------------------------------

// output[i] = x[i] * mask[i]; the mask is treated as a constant.
Tensor mask_mul(const Tensor& x, const Tensor& mask);

bool all_finite(const Tensor& x);

}  // namespace deblur
