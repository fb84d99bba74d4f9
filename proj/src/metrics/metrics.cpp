#include "deblur/metrics/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace deblur {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

const std::vector<double>& gaussian_window() {
  static const std::vector<double> window = [] {
    std::vector<double> w(kWindow * kWindow);
    double total = 0.0;
    const double c = (kWindow - 1) / 2.0;
    for (int y = 0; y < kWindow; ++y) {
      for (int x = 0; x < kWindow; ++x) {
        const double d2 = (x - c) * (x - c) + (y - c) * (y - c);
        w[y * kWindow + x] = std::exp(-d2 / (2.0 * kSigma * kSigma));
        total += w[y * kWindow + x];
      }
    }
    for (double& v : w) v /= total;
    return w;
  }();
  return window;
}

struct Plane {
  std::vector<double> values;
  std::int64_t h = 0, w = 0;
};

std::vector<Plane> to_planes(const Tensor& t) {
  const Shape s = t.shape();
  auto p = t.data();
  std::vector<Plane> planes;
  planes.reserve(static_cast<std::size_t>(s.n * s.c));
  for (std::int64_t nc = 0; nc < s.n * s.c; ++nc) {
    Plane plane;
    plane.h = s.h;
    plane.w = s.w;
    plane.values.assign(p.begin() + nc * s.h * s.w, p.begin() + (nc + 1) * s.h * s.w);
    planes.push_back(std::move(plane));
  }
  return planes;
}

// Mean luminance and contrast-structure terms over valid window positions.
struct SsimTerms {
  double luminance = 0.0;
  double contrast_structure = 0.0;
  double combined = 0.0;
};

SsimTerms ssim_plane(const Plane& a, const Plane& b, double data_range) {
  if (a.h < kWindow || a.w < kWindow) {
    throw std::invalid_argument("ssim: image " + std::to_string(a.h) + "x" +
                                std::to_string(a.w) + " smaller than the 11x11 window");
  }
  const double c1 = (kK1 * data_range) * (kK1 * data_range);
  const double c2 = (kK2 * data_range) * (kK2 * data_range);
  const auto& win = gaussian_window();

  SsimTerms terms;
  std::int64_t count = 0;
  for (std::int64_t y = 0; y + kWindow <= a.h; ++y) {
    for (std::int64_t x = 0; x + kWindow <= a.w; ++x) {
      double mu_a = 0.0, mu_b = 0.0;
      for (int wy = 0; wy < kWindow; ++wy) {
        for (int wx = 0; wx < kWindow; ++wx) {
          const double wgt = win[wy * kWindow + wx];
          mu_a += wgt * a.values[(y + wy) * a.w + (x + wx)];
          mu_b += wgt * b.values[(y + wy) * b.w + (x + wx)];
        }
      }
      double var_a = 0.0, var_b = 0.0, cov = 0.0;
      for (int wy = 0; wy < kWindow; ++wy) {
        for (int wx = 0; wx < kWindow; ++wx) {
          const double wgt = win[wy * kWindow + wx];
          const double da = a.values[(y + wy) * a.w + (x + wx)] - mu_a;
          const double db = b.values[(y + wy) * b.w + (x + wx)] - mu_b;
          var_a += wgt * da * da;
          var_b += wgt * db * db;
          cov += wgt * da * db;
        }
      }
      const double lum = (2.0 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1);
      const double cs = (2.0 * cov + c2) / (var_a + var_b + c2);
      terms.luminance += lum;
      terms.contrast_structure += cs;
      terms.combined += lum * cs;
      ++count;
    }
  }
  terms.luminance /= count;
  terms.contrast_structure /= count;
  terms.combined /= count;
  return terms;
}

Plane mean_pool2(const Plane& p) {
  Plane out;
  out.h = p.h / 2;
  out.w = p.w / 2;
  out.values.assign(static_cast<std::size_t>(out.h * out.w), 0.0);
  for (std::int64_t y = 0; y < out.h; ++y) {
    for (std::int64_t x = 0; x < out.w; ++x) {
      out.values[y * out.w + x] =
          0.25 * (p.values[(2 * y) * p.w + 2 * x] + p.values[(2 * y) * p.w + 2 * x + 1] +
                  p.values[(2 * y + 1) * p.w + 2 * x] + p.values[(2 * y + 1) * p.w + 2 * x + 1]);
    }
  }
  return out;
}

constexpr double kMsWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

}  // namespace

double psnr(const Tensor& a, const Tensor& b, double data_range) {
  check_same_shape(a, b, "psnr");
  if (!(data_range > 0.0)) throw std::invalid_argument("psnr: data_range must be positive");
  auto pa = a.data();
  auto pb = b.data();
  double mse = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
    mse += d * d;
  }
  mse /= static_cast<double>(pa.size());
  if (mse == 0.0) return 99.0;
  return 10.0 * std::log10(data_range * data_range / mse);
}

double ssim(const Tensor& a, const Tensor& b, double data_range) {
  check_same_shape(a, b, "ssim");
  auto pa = to_planes(a);
  auto pb = to_planes(b);
  double total = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    total += ssim_plane(pa[i], pb[i], data_range).combined;
  }
  return total / static_cast<double>(pa.size());
}

double ms_ssim(const Tensor& a, const Tensor& b, double data_range) {
  check_same_shape(a, b, "ms_ssim");
  const Shape s = a.shape();

  // largest scale count (max 5) for which the coarsest image still fits the window
  int scales = 0;
  {
    std::int64_t h = s.h, w = s.w;
    while (scales < 5 && h >= kWindow && w >= kWindow) {
      ++scales;
      h /= 2;
      w /= 2;
    }
  }
  if (scales == 0) {
    throw std::invalid_argument("ms_ssim: image " + std::to_string(s.h) + "x" +
                                std::to_string(s.w) + " smaller than the 11x11 window");
  }
  double weights[5];
  double weight_sum = 0.0;
  for (int j = 0; j < scales; ++j) weight_sum += kMsWeights[j];
  for (int j = 0; j < scales; ++j) {
    weights[j] = scales == 5 ? kMsWeights[j] : kMsWeights[j] / weight_sum;
  }

  auto pa = to_planes(a);
  auto pb = to_planes(b);
  double total = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    Plane ca = pa[i], cb = pb[i];
    double value = 1.0;
    for (int j = 0; j < scales; ++j) {
      SsimTerms terms = ssim_plane(ca, cb, data_range);
      const double cs = std::max(terms.contrast_structure, 0.0);
      if (j + 1 == scales) {
        const double lum = std::max(terms.luminance, 0.0);
        value *= std::pow(lum * cs, weights[j]);
      } else {
        value *= std::pow(cs, weights[j]);
        ca = mean_pool2(ca);
        cb = mean_pool2(cb);
      }
    }
    total += value;
  }
  return total / static_cast<double>(pa.size());
}

MetricReport MetricReport::from_rows(std::vector<MetricRow> rows) {
  MetricReport report;
  report.rows = std::move(rows);
  if (report.rows.empty()) return report;
  for (const MetricRow& row : report.rows) {
    report.mean_psnr += row.psnr;
    report.mean_ssim += row.ssim;
    report.mean_ms_ssim += row.ms_ssim;
  }
  const double n = static_cast<double>(report.rows.size());
  report.mean_psnr /= n;
  report.mean_ssim /= n;
  report.mean_ms_ssim /= n;
  return report;
}

std::string MetricReport::human_table() const {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-24s %10s %10s %10s\n", "image", "psnr(dB)", "ssim",
                "ms-ssim");
  os << line;
  for (const MetricRow& row : rows) {
    std::snprintf(line, sizeof(line), "%-24s %10.3f %10.4f %10.4f\n", row.name.c_str(), row.psnr,
                  row.ssim, row.ms_ssim);
    os << line;
  }
  std::snprintf(line, sizeof(line), "%-24s %10.3f %10.4f %10.4f  (%zu images)\n", "mean",
                mean_psnr, mean_ssim, mean_ms_ssim, rows.size());
  os << line;
  return os.str();
}

std::string MetricReport::machine_format() const {
  std::ostringstream os;
  char line[160];
  for (const MetricRow& row : rows) {
    std::snprintf(line, sizeof(line), "%s\t%.6f\t%.6f\t%.6f\n", row.name.c_str(), row.psnr,
                  row.ssim, row.ms_ssim);
    os << line;
  }
  return os.str();
}

Tensor to_unit_range(const Tensor& image) {
  Tensor out = Tensor::zeros(image.shape());
  auto src = image.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = (src[i] + 1.0f) / 2.0f;
  return out;
}

}  // namespace deblur
