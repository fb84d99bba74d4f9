#pragma once

#include <cstdint>
#include <vector>

// Raw dense kernels on row-major NCHW buffers. Templated on the scalar so
// the finite-difference harness can run a 64-bit mirror of every op while
// training stays in float32. No bounds checks here; callers validate.

namespace deblur::kernels {

using i64 = std::int64_t;

struct ConvGeom {
  i64 n, cin, hin, win;        // input
  i64 cout, kh, kw;            // weight is cout x cin x kh x kw
  i64 stride = 1, pad = 0;     // symmetric zero padding
  i64 hout, wout;

  static ConvGeom forward(i64 n, i64 cin, i64 hin, i64 win, i64 cout, i64 kh, i64 kw,
                          i64 stride, i64 pad) {
    ConvGeom g{n, cin, hin, win, cout, kh, kw, stride, pad, 0, 0};
    g.hout = (hin + 2 * pad - kh) / stride + 1;
    g.wout = (win + 2 * pad - kw) / stride + 1;
    return g;
  }
};

// y[n,co,oh,ow] = sum_{ci,kh,kw} x[n,ci,oh*s-p+kh,ow*s-p+kw] * w[co,ci,kh,kw]
template <typename T>
void conv2d_fwd(const ConvGeom& g, const T* x, const T* w, T* y) {
  const i64 in_hw = g.hin * g.win;
  const i64 out_hw = g.hout * g.wout;
  for (i64 n = 0; n < g.n; ++n) {
    for (i64 co = 0; co < g.cout; ++co) {
      T* yp = y + (n * g.cout + co) * out_hw;
      for (i64 i = 0; i < out_hw; ++i) yp[i] = T(0);
      for (i64 ci = 0; ci < g.cin; ++ci) {
        const T* xp = x + (n * g.cin + ci) * in_hw;
        const T* wp = w + (co * g.cin + ci) * g.kh * g.kw;
        for (i64 kh = 0; kh < g.kh; ++kh) {
          for (i64 kw = 0; kw < g.kw; ++kw) {
            const T wv = wp[kh * g.kw + kw];
            if (wv == T(0)) continue;
            for (i64 oh = 0; oh < g.hout; ++oh) {
              const i64 ih = oh * g.stride - g.pad + kh;
              if (ih < 0 || ih >= g.hin) continue;
              // valid ow range: 0 <= ow*s - p + kw < win
              i64 ow_lo = 0, ow_hi = g.wout;
              while (ow_lo < ow_hi && ow_lo * g.stride - g.pad + kw < 0) ++ow_lo;
              while (ow_hi > ow_lo && (ow_hi - 1) * g.stride - g.pad + kw >= g.win) --ow_hi;
              T* yrow = yp + oh * g.wout;
              const T* xrow = xp + ih * g.win - g.pad + kw;
              if (g.stride == 1) {
                for (i64 ow = ow_lo; ow < ow_hi; ++ow) yrow[ow] += wv * xrow[ow];
              } else {
                for (i64 ow = ow_lo; ow < ow_hi; ++ow) yrow[ow] += wv * xrow[ow * g.stride];
              }
            }
          }
        }
      }
    }
  }
}

// gx[n,ci,ih,iw] += sum_{co,kh,kw} gy[n,co,oh,ow] * w[co,ci,kh,kw]
// (adjoint of conv2d_fwd in its first argument; gx must be zero-filled)
template <typename T>
void conv2d_dx(const ConvGeom& g, const T* gy, const T* w, T* gx) {
  const i64 in_hw = g.hin * g.win;
  const i64 out_hw = g.hout * g.wout;
  for (i64 n = 0; n < g.n; ++n) {
    for (i64 co = 0; co < g.cout; ++co) {
      const T* gyp = gy + (n * g.cout + co) * out_hw;
      for (i64 ci = 0; ci < g.cin; ++ci) {
        T* gxp = gx + (n * g.cin + ci) * in_hw;
        const T* wp = w + (co * g.cin + ci) * g.kh * g.kw;
        for (i64 kh = 0; kh < g.kh; ++kh) {
          for (i64 kw = 0; kw < g.kw; ++kw) {
            const T wv = wp[kh * g.kw + kw];
            if (wv == T(0)) continue;
            for (i64 oh = 0; oh < g.hout; ++oh) {
              const i64 ih = oh * g.stride - g.pad + kh;
              if (ih < 0 || ih >= g.hin) continue;
              i64 ow_lo = 0, ow_hi = g.wout;
              while (ow_lo < ow_hi && ow_lo * g.stride - g.pad + kw < 0) ++ow_lo;
              while (ow_hi > ow_lo && (ow_hi - 1) * g.stride - g.pad + kw >= g.win) --ow_hi;
              const T* gyrow = gyp + oh * g.wout;
              T* gxrow = gxp + ih * g.win - g.pad + kw;
              for (i64 ow = ow_lo; ow < ow_hi; ++ow) gxrow[ow * g.stride] += wv * gyrow[ow];
            }
          }
        }
      }
    }
  }
}

// gw[co,ci,kh,kw] = sum_{n,oh,ow} gy[n,co,oh,ow] * x[n,ci,oh*s-p+kh,ow*s-p+kw]
// (gw must be zero-filled)
template <typename T>
void conv2d_dw(const ConvGeom& g, const T* x, const T* gy, T* gw) {
  const i64 in_hw = g.hin * g.win;
  const i64 out_hw = g.hout * g.wout;
  for (i64 n = 0; n < g.n; ++n) {
    for (i64 co = 0; co < g.cout; ++co) {
      const T* gyp = gy + (n * g.cout + co) * out_hw;
      for (i64 ci = 0; ci < g.cin; ++ci) {
        const T* xp = x + (n * g.cin + ci) * in_hw;
        T* gwp = gw + (co * g.cin + ci) * g.kh * g.kw;
        for (i64 kh = 0; kh < g.kh; ++kh) {
          for (i64 kw = 0; kw < g.kw; ++kw) {
            T acc = T(0);
            for (i64 oh = 0; oh < g.hout; ++oh) {
              const i64 ih = oh * g.stride - g.pad + kh;
              if (ih < 0 || ih >= g.hin) continue;
              i64 ow_lo = 0, ow_hi = g.wout;
              while (ow_lo < ow_hi && ow_lo * g.stride - g.pad + kw < 0) ++ow_lo;
              while (ow_hi > ow_lo && (ow_hi - 1) * g.stride - g.pad + kw >= g.win) --ow_hi;
              const T* gyrow = gyp + oh * g.wout;
              const T* xrow = xp + ih * g.win - g.pad + kw;
              for (i64 ow = ow_lo; ow < ow_hi; ++ow) acc += gyrow[ow] * xrow[ow * g.stride];
            }
            gwp[kh * g.kw + kw] += acc;
          }
        }
      }
    }
  }
}

// Mirror-without-edge-repeat index fold: ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
inline i64 reflect_index(i64 i, i64 n) {
  if (n == 1) return 0;
  const i64 period = 2 * (n - 1);
  i64 m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

template <typename T>
void reflect_pad2d(i64 n, i64 c, i64 h, i64 w, i64 pad, const T* x, T* y) {
  const i64 ho = h + 2 * pad, wo = w + 2 * pad;
  for (i64 nc = 0; nc < n * c; ++nc) {
    const T* xp = x + nc * h * w;
    T* yp = y + nc * ho * wo;
    for (i64 oh = 0; oh < ho; ++oh) {
      const i64 ih = reflect_index(oh - pad, h);
      for (i64 ow = 0; ow < wo; ++ow) {
        yp[oh * wo + ow] = xp[ih * w + reflect_index(ow - pad, w)];
      }
    }
  }
}

// Adjoint of reflect_pad2d: fold padded gradients back onto their sources.
// gx must be zero-filled.
template <typename T>
void reflect_pad2d_adjoint(i64 n, i64 c, i64 h, i64 w, i64 pad, const T* gy, T* gx) {
  const i64 ho = h + 2 * pad, wo = w + 2 * pad;
  for (i64 nc = 0; nc < n * c; ++nc) {
    const T* gyp = gy + nc * ho * wo;
    T* gxp = gx + nc * h * w;
    for (i64 oh = 0; oh < ho; ++oh) {
      const i64 ih = reflect_index(oh - pad, h);
      for (i64 ow = 0; ow < wo; ++ow) {
        gxp[ih * w + reflect_index(ow - pad, w)] += gyp[oh * wo + ow];
      }
    }
  }
}

}  // namespace deblur::kernels
