#pragma once

#include <string>
#include <vector>

#include "deblur/core/tensor.hpp"

namespace deblur {

// All metrics run in double precision on [0, 1]-mapped images (the
// network's [-1, 1] range shifted), data_range 1 unless stated otherwise.
// Multi-channel images are scored per channel and averaged.

// 10*log10(data_range^2 / MSE); identical images report the 99.0 dB cap.
double psnr(const Tensor& a, const Tensor& b, double data_range = 1.0);

// Gaussian 11x11 window (sigma 1.5), k1=0.01, k2=0.03, combined single
// formula, mean over valid window positions and channels.
double ssim(const Tensor& a, const Tensor& b, double data_range = 1.0);

// Product over scales of mean contrast-structure terms (luminance only at
// the coarsest), each raised to the standard weight; 2x2 mean-pool
// downsampling. Scale count shrinks (with renormalized weights) when the
// image is too small for all five scales.
double ms_ssim(const Tensor& a, const Tensor& b, double data_range = 1.0);

struct MetricRow {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
  double ms_ssim = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  double mean_ms_ssim = 0.0;

  static MetricReport from_rows(std::vector<MetricRow> rows);
  std::string human_table() const;
  // line-oriented: name<TAB>psnr<TAB>ssim<TAB>msssim
  std::string machine_format() const;
};

// Maps a [-1, 1] image tensor onto [0, 1] for metric evaluation.
Tensor to_unit_range(const Tensor& image);

}  // namespace deblur
