#include "deblur/data/psf.hpp"

#include <cmath>
#include <stdexcept>

#include "deblur/core/kernels.hpp"

namespace deblur {

MotionPSF make_psf(double length, double angle_deg) {
  if (length < 1.0) {
    throw std::invalid_argument("make_psf: length " + std::to_string(length) + " < 1");
  }
  const std::int64_t half = static_cast<std::int64_t>(std::ceil(length / 2.0));
  const std::int64_t size = 2 * half + 1;
  MotionPSF psf;
  psf.length = length;
  psf.angle_deg = angle_deg;
  psf.size = size;
  psf.kernel.assign(static_cast<std::size_t>(size * size), 0.0);

  const double theta = angle_deg * 3.14159265358979323846 / 180.0;
  const double dx = std::cos(theta), dy = std::sin(theta);
  const double center = static_cast<double>(half);

  // 8x supersampling along the segment; midpoint sampling never lands on a
  // half-integer cell boundary, so axis-aligned kernels come out exact.
  const std::int64_t samples =
      8 * std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(length)));
  const double mass = 1.0 / static_cast<double>(samples);
  for (std::int64_t s = 0; s < samples; ++s) {
    const double t = (static_cast<double>(s) + 0.5) / static_cast<double>(samples) - 0.5;
    const double x = center + t * length * dx;
    const double y = center + t * length * dy;
    const std::int64_t cx = static_cast<std::int64_t>(std::llround(x));
    const std::int64_t cy = static_cast<std::int64_t>(std::llround(y));
    if (cx < 0 || cx >= size || cy < 0 || cy >= size) continue;
    psf.kernel[static_cast<std::size_t>(cy * size + cx)] += mass;
  }

  double total = 0.0;
  for (double v : psf.kernel) total += v;
  if (total <= 0.0) throw std::runtime_error("make_psf: degenerate kernel");
  for (double& v : psf.kernel) v /= total;
  return psf;
}

Tensor apply_blur(const Tensor& image, const MotionPSF& psf) {
  const Shape s = image.shape();
  const std::int64_t k = psf.size;
  const std::int64_t half = k / 2;
  Tensor out = Tensor::zeros(s);
  auto px = image.data();
  auto po = out.data();
  for (std::int64_t nc = 0; nc < s.n * s.c; ++nc) {
    const float* src = px.data() + nc * s.h * s.w;
    float* dst = po.data() + nc * s.h * s.w;
    for (std::int64_t y = 0; y < s.h; ++y) {
      for (std::int64_t x = 0; x < s.w; ++x) {
        double acc = 0.0;
        for (std::int64_t ky = 0; ky < k; ++ky) {
          const std::int64_t iy = kernels::reflect_index(y + ky - half, s.h);
          const double* krow = psf.kernel.data() + ky * k;
          for (std::int64_t kx = 0; kx < k; ++kx) {
            const double w = krow[kx];
            if (w == 0.0) continue;
            const std::int64_t ix = kernels::reflect_index(x + kx - half, s.w);
            acc += w * static_cast<double>(src[iy * s.w + ix]);
          }
        }
        dst[y * s.w + x] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

}  // namespace deblur
