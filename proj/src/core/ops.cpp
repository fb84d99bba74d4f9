#include "deblur/core/ops.hpp"

#include <cmath>
#include <stdexcept>

#include "deblur/core/kernels.hpp"

namespace deblur {

namespace {

using kernels::ConvGeom;

template <typename Fn>
void attach(Tensor& out, const char* name, std::vector<Tensor> inputs, Fn&& body) {
  struct LambdaFn : GradFn {
    Fn fn;
    LambdaFn(const char* n, Fn f) : GradFn(n), fn(std::move(f)) {}
    std::vector<Tensor> backward(const Tensor& g) override { return fn(inputs, g); }
  };
  auto node = std::make_shared<LambdaFn>(name, std::forward<Fn>(body));
  node->inputs = std::move(inputs);
  out.set_grad_fn(node);
}

Tensor elementwise_binary(const Tensor& a, const Tensor& b, const char* name,
                          float (*op)(float, float)) {
  check_same_shape(a, b, name);
  Tensor out = Tensor::zeros(a.shape());
  auto pa = a.data(), pb = b.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = op(pa[i], pb[i]);
  return out;
}

// Saved elementwise gradient masks never require grad themselves: the mask
// of a kink function is piecewise constant, so its derivative contribution
// is zero almost everywhere.
Tensor constant_like(const Tensor& x, float (*f)(float)) {
  Tensor m = Tensor::zeros(x.shape());
  auto px = x.data();
  auto pm = m.data();
  for (std::size_t i = 0; i < pm.size(); ++i) pm[i] = f(px[i]);
  return m;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out = elementwise_binary(a, b, "add", [](float x, float y) { return x + y; });
  if (should_record({&a, &b})) {
    attach(out, "add", {a, b}, [](std::vector<Tensor>&, const Tensor& g) {
      return std::vector<Tensor>{g, g};
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Tensor out = elementwise_binary(a, b, "sub", [](float x, float y) { return x - y; });
  if (should_record({&a, &b})) {
    attach(out, "sub", {a, b}, [](std::vector<Tensor>&, const Tensor& g) {
      return std::vector<Tensor>{g, scale(g, -1.0f)};
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Tensor out = elementwise_binary(a, b, "mul", [](float x, float y) { return x * y; });
  if (should_record({&a, &b})) {
    attach(out, "mul", {a, b}, [](std::vector<Tensor>& in, const Tensor& g) {
      return std::vector<Tensor>{mul(g, in[1]), mul(g, in[0])};
    });
  }
  return out;
}

Tensor scale(const Tensor& x, float s) {
  Tensor out = Tensor::zeros(x.shape());
  auto px = x.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = s * px[i];
  if (should_record({&x})) {
    attach(out, "scale", {x}, [s](std::vector<Tensor>&, const Tensor& g) {
      return std::vector<Tensor>{scale(g, s)};
    });
  }
  return out;
}

Tensor add_scalar(const Tensor& x, float s) {
  Tensor out = Tensor::zeros(x.shape());
  auto px = x.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = px[i] + s;
  if (should_record({&x})) {
    attach(out, "add_scalar", {x}, [](std::vector<Tensor>&, const Tensor& g) {
      return std::vector<Tensor>{g};
    });
  }
  return out;
}

Tensor pow_scalar(const Tensor& x, float p) {
  Tensor out = Tensor::zeros(x.shape());
  auto px = x.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = std::pow(px[i], p);
  if (should_record({&x})) {
    attach(out, "pow_scalar", {x}, [p](std::vector<Tensor>& in, const Tensor& g) {
      return std::vector<Tensor>{scale(mul(g, pow_scalar(in[0], p - 1.0f)), p)};
    });
  }
  return out;
}

Tensor abs(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  auto px = x.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = std::fabs(px[i]);
  if (should_record({&x})) {
    Tensor sign = constant_like(x, [](float v) { return v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f); });
    attach(out, "abs", {x}, [sign](std::vector<Tensor>&, const Tensor& g) {
      return std::vector<Tensor>{mask_mul(g, sign)};
    });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  auto px = x.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = px[i] > 0.0f ? px[i] : 0.0f;
  if (should_record({&x})) {
    // right-hand derivative at the kink: relu'(0) = 1
    Tensor mask = constant_like(x, [](float v) { return v >= 0.0f ? 1.0f : 0.0f; });
    attach(out, "relu", {x}, [mask](std::vector<Tensor>&, const Tensor& g) {
      return std::vector<Tensor>{mask_mul(g, mask)};
    });
  }
  return out;
}

Tensor leaky_relu(const Tensor& x, float slope) {
  Tensor out = Tensor::zeros(x.shape());
  auto px = x.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = px[i] > 0.0f ? px[i] : slope * px[i];
  if (should_record({&x})) {
    Tensor mask = Tensor::zeros(x.shape());
    auto pm = mask.data();
    for (std::size_t i = 0; i < pm.size(); ++i) pm[i] = px[i] >= 0.0f ? 1.0f : slope;
    attach(out, "leaky_relu", {x}, [mask](std::vector<Tensor>&, const Tensor& g) {
      return std::vector<Tensor>{mask_mul(g, mask)};
    });
  }
  return out;
}

Tensor tanh(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  auto px = x.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = std::tanh(px[i]);
  if (should_record({&x})) {
    // recompute tanh(x) in backward so the derivative stays differentiable
    attach(out, "tanh", {x}, [](std::vector<Tensor>& in, const Tensor& g) {
      Tensor y = tanh(in[0]);
      Tensor one_minus_y2 = sub(Tensor::full(y.shape(), 1.0f), mul(y, y));
      return std::vector<Tensor>{mul(g, one_minus_y2)};
    });
  }
  return out;
}

Tensor mask_mul(const Tensor& x, const Tensor& mask) {
  check_same_shape(x, mask, "mask_mul");
  Tensor out = Tensor::zeros(x.shape());
  auto px = x.data();
  auto pm = mask.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = px[i] * pm[i];
  if (should_record({&x})) {
    attach(out, "mask_mul", {x}, [mask](std::vector<Tensor>&, const Tensor& g) {
      return std::vector<Tensor>{mask_mul(g, mask)};
    });
  }
  return out;
}

// --- adjoint pairs ----------------------------------------------------------

Tensor reflect_pad2d(const Tensor& x, std::int64_t pad) {
  if (pad < 0) throw std::invalid_argument("reflect_pad2d: negative pad");
  const Shape s = x.shape();
  if (pad >= s.h || pad >= s.w) {
    throw std::invalid_argument("reflect_pad2d: pad " + std::to_string(pad) +
                                " too large for spatial size " + std::to_string(s.h) + "x" +
                                std::to_string(s.w));
  }
  Tensor out = Tensor::zeros({s.n, s.c, s.h + 2 * pad, s.w + 2 * pad});
  kernels::reflect_pad2d<float>(s.n, s.c, s.h, s.w, pad, x.data().data(), out.data().data());
  if (should_record({&x})) {
    attach(out, "reflect_pad2d", {x}, [pad, s](std::vector<Tensor>&, const Tensor& g) {
      Tensor gx = Tensor::zeros(s);
      kernels::reflect_pad2d_adjoint<float>(s.n, s.c, s.h, s.w, pad, g.data().data(),
                                            gx.data().data());
      if (should_record({&g})) {
        attach(gx, "reflect_pad2d_adjoint", {g}, [pad](std::vector<Tensor>&, const Tensor& h) {
          return std::vector<Tensor>{reflect_pad2d(h, pad)};
        });
      }
      return std::vector<Tensor>{gx};
    });
  }
  return out;
}

namespace {

// Generic linear reduction/broadcast pair. `reduce_kind` selects which axes
// collapse; every pair is its own adjoint partner.
enum class Axes { kSpatial, kChannel, kSample, kAll };

Shape reduced_shape(const Shape& s, Axes axes) {
  switch (axes) {
    case Axes::kSpatial: return {s.n, s.c, 1, 1};
    case Axes::kChannel: return {1, s.c, 1, 1};
    case Axes::kSample: return {s.n, 1, 1, 1};
    case Axes::kAll: return {1, 1, 1, 1};
  }
  return {1, 1, 1, 1};
}

std::int64_t reduced_index(const Shape& s, Axes axes, std::int64_t n, std::int64_t c) {
  switch (axes) {
    case Axes::kSpatial: return n * s.c + c;
    case Axes::kChannel: return c;
    case Axes::kSample: return n;
    case Axes::kAll: return 0;
  }
  return 0;
}

Tensor broadcast_axes(const Tensor& small, const Shape& target, Axes axes);

Tensor sum_axes(const Tensor& x, Axes axes, const char* name) {
  const Shape s = x.shape();
  Tensor out = Tensor::zeros(reduced_shape(s, axes));
  auto px = x.data();
  auto po = out.data();
  const std::int64_t hw = s.h * s.w;
  for (std::int64_t n = 0; n < s.n; ++n) {
    for (std::int64_t c = 0; c < s.c; ++c) {
      const float* p = px.data() + (n * s.c + c) * hw;
      double acc = 0.0;
      for (std::int64_t i = 0; i < hw; ++i) acc += p[i];
      po[reduced_index(s, axes, n, c)] += static_cast<float>(acc);
    }
  }
  if (should_record({&x})) {
    attach(out, name, {x}, [axes, s](std::vector<Tensor>&, const Tensor& g) {
      return std::vector<Tensor>{broadcast_axes(g, s, axes)};
    });
  }
  return out;
}

Tensor broadcast_axes(const Tensor& small, const Shape& target, Axes axes) {
  const Shape expect = reduced_shape(target, axes);
  if (!(small.shape() == expect)) {
    throw std::invalid_argument("broadcast: source shape " + small.shape().str() +
                                " does not reduce from target " + target.str());
  }
  Tensor out = Tensor::zeros(target);
  auto ps = small.data();
  auto po = out.data();
  const std::int64_t hw = target.h * target.w;
  for (std::int64_t n = 0; n < target.n; ++n) {
    for (std::int64_t c = 0; c < target.c; ++c) {
      const float v = ps[reduced_index(target, axes, n, c)];
      float* p = po.data() + (n * target.c + c) * hw;
      for (std::int64_t i = 0; i < hw; ++i) p[i] = v;
    }
  }
  if (should_record({&small})) {
    attach(out, "broadcast", {small}, [axes](std::vector<Tensor>&, const Tensor& g) {
      return std::vector<Tensor>{sum_axes(g, axes, "sum_adjoint")};
    });
  }
  return out;
}

}  // namespace

Tensor sum_spatial(const Tensor& x) { return sum_axes(x, Axes::kSpatial, "sum_spatial"); }
Tensor broadcast_spatial(const Tensor& s, std::int64_t h, std::int64_t w) {
  const Shape src = s.shape();
  return broadcast_axes(s, {src.n, src.c, h, w}, Axes::kSpatial);
}
Tensor sum_channel(const Tensor& x) { return sum_axes(x, Axes::kChannel, "sum_channel"); }
Tensor broadcast_channel(const Tensor& v, const Shape& target) {
  return broadcast_axes(v, target, Axes::kChannel);
}
Tensor sum_per_sample(const Tensor& x) { return sum_axes(x, Axes::kSample, "sum_per_sample"); }
Tensor broadcast_per_sample(const Tensor& s, const Shape& target) {
  return broadcast_axes(s, target, Axes::kSample);
}
Tensor sum_all(const Tensor& x) { return sum_axes(x, Axes::kAll, "sum_all"); }
Tensor broadcast_all(const Tensor& s, const Shape& target) {
  return broadcast_axes(s, target, Axes::kAll);
}

Tensor mean_all(const Tensor& x) {
  return scale(sum_all(x), 1.0f / static_cast<float>(x.numel()));
}

Tensor l1_mean(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "l1_mean");
  return mean_all(abs(sub(a, b)));
}

Tensor mse(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mse");
  Tensor d = sub(a, b);
  return mean_all(mul(d, d));
}

// --- convolution ------------------------------------------------------------

namespace {

void validate_conv_args(const Shape& x, const Shape& w, std::int64_t stride, std::int64_t pad) {
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (pad < 0) throw std::invalid_argument("conv2d: negative padding");
  if (x.c != w.c) {
    throw std::invalid_argument("conv2d: input channels C=" + std::to_string(x.c) +
                                " do not match weight Cin=" + std::to_string(w.c));
  }
  if (x.h + 2 * pad < w.h || x.w + 2 * pad < w.w) {
    throw std::invalid_argument("conv2d: padded input " + std::to_string(x.h + 2 * pad) + "x" +
                                std::to_string(x.w + 2 * pad) + " smaller than kernel " +
                                std::to_string(w.h) + "x" + std::to_string(w.w));
  }
}

// The three bilinear convolution maps close under differentiation:
//   fwd(x, w), dx(gy, w), dw(x, gy)
// each backward is built from the other two, which is what makes the
// gradient-penalty double backward work without special cases.
Tensor conv_fwd_node(const Tensor& x, const Tensor& w, std::int64_t stride, std::int64_t pad);
Tensor conv_dx_node(const Tensor& gy, const Tensor& w, std::int64_t stride, std::int64_t pad,
                    std::int64_t hin, std::int64_t win);
Tensor conv_dw_node(const Tensor& x, const Tensor& gy, std::int64_t stride, std::int64_t pad,
                    const Shape& wshape);

Tensor conv_fwd_node(const Tensor& x, const Tensor& w, std::int64_t stride, std::int64_t pad) {
  const Shape xs = x.shape(), ws = w.shape();
  ConvGeom g = ConvGeom::forward(xs.n, xs.c, xs.h, xs.w, ws.n, ws.h, ws.w, stride, pad);
  Tensor out = Tensor::zeros({g.n, g.cout, g.hout, g.wout});
  kernels::conv2d_fwd<float>(g, x.data().data(), w.data().data(), out.data().data());
  if (should_record({&x, &w})) {
    attach(out, "conv2d", {x, w},
           [stride, pad, xs](std::vector<Tensor>& in, const Tensor& gy) {
             Tensor gx = conv_dx_node(gy, in[1], stride, pad, xs.h, xs.w);
             Tensor gw = conv_dw_node(in[0], gy, stride, pad, in[1].shape());
             return std::vector<Tensor>{gx, gw};
           });
  }
  return out;
}

Tensor conv_dx_node(const Tensor& gy, const Tensor& w, std::int64_t stride, std::int64_t pad,
                    std::int64_t hin, std::int64_t win) {
  const Shape gs = gy.shape(), ws = w.shape();
  ConvGeom g = ConvGeom::forward(gs.n, ws.c, hin, win, ws.n, ws.h, ws.w, stride, pad);
  if (g.hout != gs.h || g.wout != gs.w) {
    throw std::invalid_argument("conv_dx: output map " + gs.str() +
                                " inconsistent with input extent " + std::to_string(hin) + "x" +
                                std::to_string(win));
  }
  if (gs.c != ws.n) {
    throw std::invalid_argument("conv_dx: channel count C=" + std::to_string(gs.c) +
                                " does not match weight Cout=" + std::to_string(ws.n));
  }
  Tensor out = Tensor::zeros({gs.n, ws.c, hin, win});
  kernels::conv2d_dx<float>(g, gy.data().data(), w.data().data(), out.data().data());
  if (should_record({&gy, &w})) {
    attach(out, "conv_dx", {gy, w},
           [stride, pad](std::vector<Tensor>& in, const Tensor& h) {
             Tensor g_gy = conv_fwd_node(h, in[1], stride, pad);
             Tensor g_w = conv_dw_node(h, in[0], stride, pad, in[1].shape());
             return std::vector<Tensor>{g_gy, g_w};
           });
  }
  return out;
}

Tensor conv_dw_node(const Tensor& x, const Tensor& gy, std::int64_t stride, std::int64_t pad,
                    const Shape& wshape) {
  const Shape xs = x.shape(), gs = gy.shape();
  ConvGeom g = ConvGeom::forward(xs.n, xs.c, xs.h, xs.w, gs.c, wshape.h, wshape.w, stride, pad);
  if (g.hout != gs.h || g.wout != gs.w) {
    throw std::invalid_argument("conv_dw: gradient map " + gs.str() +
                                " inconsistent with input " + xs.str());
  }
  Tensor out = Tensor::zeros(wshape);
  kernels::conv2d_dw<float>(g, x.data().data(), gy.data().data(), out.data().data());
  if (should_record({&x, &gy})) {
    const std::int64_t hin = xs.h, win = xs.w;
    attach(out, "conv_dw", {x, gy},
           [stride, pad, hin, win](std::vector<Tensor>& in, const Tensor& hw) {
             Tensor g_x = conv_dx_node(in[1], hw, stride, pad, hin, win);
             Tensor g_gy = conv_fwd_node(in[0], hw, stride, pad);
             return std::vector<Tensor>{g_x, g_gy};
           });
  }
  return out;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight,
              const std::optional<Tensor>& bias, std::int64_t stride, PadSpec padding) {
  Tensor x = input;
  std::int64_t pad = padding.size;
  if (padding.mode == PadMode::kReflect && padding.size > 0) {
    x = reflect_pad2d(input, padding.size);
    pad = 0;
  }
  validate_conv_args(x.shape(), weight.shape(), stride, pad);
  Tensor out = conv_fwd_node(x, weight, stride, pad);
  if (bias) {
    const Shape bs = bias->shape();
    if (!(bs == Shape{1, weight.shape().n, 1, 1})) {
      throw std::invalid_argument("conv2d: bias shape " + bs.str() + " must be 1x" +
                                  std::to_string(weight.shape().n) + "x1x1");
    }
    out = add(out, broadcast_channel(*bias, out.shape()));
  }
  return out;
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, std::int64_t stride,
                        std::int64_t padding, std::int64_t output_padding) {
  const Shape xs = input.shape(), ws = weight.shape();
  if (stride < 1) throw std::invalid_argument("conv_transpose2d: stride must be >= 1");
  if (output_padding < 0 || output_padding >= stride) {
    throw std::invalid_argument("conv_transpose2d: output_padding must be in [0, stride)");
  }
  if (xs.c != ws.n) {
    throw std::invalid_argument("conv_transpose2d: input channels C=" + std::to_string(xs.c) +
                                " do not match weight leading dim " + std::to_string(ws.n));
  }
  const std::int64_t hout = (xs.h - 1) * stride - 2 * padding + ws.h + output_padding;
  const std::int64_t wout = (xs.w - 1) * stride - 2 * padding + ws.w + output_padding;
  if (hout < 1 || wout < 1) {
    throw std::invalid_argument("conv_transpose2d: non-positive output extent " +
                                std::to_string(hout) + "x" + std::to_string(wout));
  }
  return conv_dx_node(input, weight, stride, padding, hout, wout);
}

Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float epsilon) {
  const Shape s = x.shape();
  const Shape param{1, s.c, 1, 1};
  if (!(gamma.shape() == param) || !(beta.shape() == param)) {
    throw std::invalid_argument("instance_norm: gamma/beta must be shaped " + param.str());
  }
  const float inv_hw = 1.0f / static_cast<float>(s.h * s.w);
  Tensor mu = scale(sum_spatial(x), inv_hw);
  Tensor centered = sub(x, broadcast_spatial(mu, s.h, s.w));
  Tensor var = scale(sum_spatial(mul(centered, centered)), inv_hw);
  Tensor inv_std = pow_scalar(add_scalar(var, epsilon), -0.5f);
  Tensor normalized = mul(centered, broadcast_spatial(inv_std, s.h, s.w));
  return add(mul(normalized, broadcast_channel(gamma, s)), broadcast_channel(beta, s));
}

bool all_finite(const Tensor& x) {
  for (float v : x.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace deblur
