#include "deblur/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "deblur/core/rng.hpp"
#include "deblur/data/image_io.hpp"

namespace deblur {

namespace fs = std::filesystem;

namespace {

// Oriented step edge: adds +-amplitude on either side of a line through
// (cx, cy) with normal direction phi.
void add_edge(std::vector<float>& img, std::int64_t size, double cx, double cy, double phi,
              double amplitude) {
  const double nx = std::cos(phi), ny = std::sin(phi);
  for (std::int64_t y = 0; y < size; ++y) {
    for (std::int64_t x = 0; x < size; ++x) {
      const double d = (x - cx) * nx + (y - cy) * ny;
      img[y * size + x] += d >= 0 ? static_cast<float>(amplitude)
                                  : static_cast<float>(-amplitude);
    }
  }
}

std::vector<float> synth_luminance(std::int64_t size, Pcg32& rng) {
  std::vector<float> img(static_cast<std::size_t>(size * size), 0.0f);

  // background gradient at a random orientation
  const double theta = rng.uniform(0.0, 3.14159265358979323846);
  const double gx = std::cos(theta), gy = std::sin(theta);
  const double g_amp = rng.uniform(0.2, 0.6);
  const double base = rng.uniform(-0.3, 0.3);
  for (std::int64_t y = 0; y < size; ++y) {
    for (std::int64_t x = 0; x < size; ++x) {
      const double t = (gx * x + gy * y) / static_cast<double>(size) - 0.5;
      img[y * size + x] = static_cast<float>(base + g_amp * t);
    }
  }

  // rectangles
  const int n_rect = 2 + static_cast<int>(rng.next_below(4));
  for (int r = 0; r < n_rect; ++r) {
    const std::int64_t w = 2 + rng.next_below(static_cast<std::uint32_t>(size / 2));
    const std::int64_t h = 2 + rng.next_below(static_cast<std::uint32_t>(size / 2));
    const std::int64_t x0 = rng.next_below(static_cast<std::uint32_t>(size - 1));
    const std::int64_t y0 = rng.next_below(static_cast<std::uint32_t>(size - 1));
    const float v = static_cast<float>(rng.uniform(-0.8, 0.8));
    for (std::int64_t y = y0; y < std::min(size, y0 + h); ++y) {
      for (std::int64_t x = x0; x < std::min(size, x0 + w); ++x) {
        img[y * size + x] = v;
      }
    }
  }

  // one checkerboard patch
  {
    const std::int64_t cell = 2 + rng.next_below(4);
    const std::int64_t extent = size / 2;
    const std::int64_t x0 = rng.next_below(static_cast<std::uint32_t>(size - extent));
    const std::int64_t y0 = rng.next_below(static_cast<std::uint32_t>(size - extent));
    const float a = static_cast<float>(rng.uniform(0.2, 0.7));
    for (std::int64_t y = y0; y < y0 + extent; ++y) {
      for (std::int64_t x = x0; x < x0 + extent; ++x) {
        const bool on = (((x - x0) / cell) + ((y - y0) / cell)) % 2 == 0;
        img[y * size + x] = on ? a : -a;
      }
    }
  }

  // oriented step edge
  add_edge(img, size, rng.uniform(0.0, size), rng.uniform(0.0, size),
           rng.uniform(0.0, 3.14159265358979323846), rng.uniform(0.05, 0.2));

  for (float& v : img) v = std::clamp(v, -0.95f, 0.95f);
  return img;
}

double psnr_raw(const Tensor& a, const Tensor& b) {
  auto pa = a.data();
  auto pb = b.data();
  double mse = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    // metrics run on [0,1]-mapped values, data range 1
    const double d = (pa[i] - pb[i]) / 2.0;
    mse += d * d;
  }
  mse /= static_cast<double>(pa.size());
  if (mse == 0.0) return 99.0;
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace

std::vector<ImagePair> generate_synthetic_dataset(int n, std::int64_t size, const MotionPSF& psf,
                                                  std::uint64_t seed) {
  if (n < 0) throw std::invalid_argument("generate_synthetic_dataset: negative count");
  if (size < 4 || size % 4 != 0) {
    throw std::invalid_argument("generate_synthetic_dataset: size " + std::to_string(size) +
                                " must be a positive multiple of 4");
  }
  std::vector<ImagePair> pairs;
  pairs.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Pcg32 rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    Tensor sharp = Tensor::zeros({1, 3, size, size});
    auto pd = sharp.data();
    std::vector<float> lum = synth_luminance(size, rng);
    // correlated color channels: shared luminance, per-channel tint
    for (std::int64_t c = 0; c < 3; ++c) {
      const float tint = static_cast<float>(rng.uniform(-0.15, 0.15));
      float* dst = pd.data() + c * size * size;
      for (std::int64_t p = 0; p < size * size; ++p) {
        dst[p] = std::clamp(lum[p] + tint, -1.0f, 1.0f);
      }
    }
    ImagePair pair;
    pair.sharp = sharp;
    pair.blurry = apply_blur(sharp, psf);
    char id[32];
    std::snprintf(id, sizeof(id), "img_%04d", i);
    pair.id = id;
    pair.psf = psf;
    if (psf.length >= 3.0) {
      const double p = psnr_raw(pair.blurry, pair.sharp);
      if (!(std::isfinite(p) && p < 60.0)) {
        throw std::runtime_error("generate_synthetic_dataset: blur failed to degrade " +
                                 pair.id + " (psnr " + std::to_string(p) + " dB)");
      }
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

void save_dataset(const std::string& dir, const std::vector<ImagePair>& pairs) {
  fs::create_directories(fs::path(dir) / "blur");
  fs::create_directories(fs::path(dir) / "sharp");
  for (const ImagePair& pair : pairs) {
    save_image((fs::path(dir) / "blur" / (pair.id + ".ppm")).string(), pair.blurry);
    save_image((fs::path(dir) / "sharp" / (pair.id + ".ppm")).string(), pair.sharp);
  }
}

std::vector<std::string> list_images(const std::string& dir) {
  std::vector<std::string> names;
  if (!fs::is_directory(dir)) throw std::runtime_error(dir + " is not a directory");
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (ext == ".ppm" || ext == ".pgm") names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::vector<ImagePair> load_paired_dirs(const std::string& dir) {
  const fs::path blur_dir = fs::path(dir) / "blur";
  const fs::path sharp_dir = fs::path(dir) / "sharp";
  std::vector<std::string> blur_names = list_images(blur_dir.string());
  std::vector<std::string> sharp_names = list_images(sharp_dir.string());

  std::vector<std::string> unmatched;
  std::set_symmetric_difference(blur_names.begin(), blur_names.end(), sharp_names.begin(),
                                sharp_names.end(), std::back_inserter(unmatched));
  if (!unmatched.empty()) {
    std::string msg = dir + ": unmatched filenames across blur/ and sharp/:";
    for (const std::string& name : unmatched) msg += " " + name;
    throw std::runtime_error(msg);
  }

  std::vector<ImagePair> pairs;
  pairs.reserve(blur_names.size());
  for (const std::string& name : blur_names) {
    ImagePair pair;
    pair.blurry = load_image((blur_dir / name).string());
    pair.sharp = load_image((sharp_dir / name).string());
    if (!(pair.blurry.shape() == pair.sharp.shape())) {
      throw std::runtime_error(dir + "/" + name + ": blur and sharp image shapes differ");
    }
    pair.id = fs::path(name).stem().string();
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

namespace {

Tensor hflip(const Tensor& image) {
  const Shape s = image.shape();
  Tensor out = Tensor::zeros(s);
  auto src = image.data();
  auto dst = out.data();
  for (std::int64_t nc = 0; nc < s.n * s.c; ++nc) {
    for (std::int64_t y = 0; y < s.h; ++y) {
      const float* row = src.data() + (nc * s.h + y) * s.w;
      float* orow = dst.data() + (nc * s.h + y) * s.w;
      for (std::int64_t x = 0; x < s.w; ++x) orow[x] = row[s.w - 1 - x];
    }
  }
  return out;
}

// Crop a (ch x cw) window at (y0, x0) and bilinearly resize back to the
// original extent.
Tensor crop_resize(const Tensor& image, std::int64_t y0, std::int64_t x0, std::int64_t ch,
                   std::int64_t cw) {
  const Shape s = image.shape();
  Tensor out = Tensor::zeros(s);
  auto src = image.data();
  auto dst = out.data();
  for (std::int64_t nc = 0; nc < s.n * s.c; ++nc) {
    const float* plane = src.data() + nc * s.h * s.w;
    float* oplane = dst.data() + nc * s.h * s.w;
    for (std::int64_t y = 0; y < s.h; ++y) {
      const double sy = ch > 1 ? static_cast<double>(y) * (ch - 1) / (s.h - 1) : 0.0;
      const std::int64_t iy = std::min<std::int64_t>(static_cast<std::int64_t>(sy), ch - 2 >= 0 ? ch - 2 : 0);
      const double fy = sy - iy;
      for (std::int64_t x = 0; x < s.w; ++x) {
        const double sx = cw > 1 ? static_cast<double>(x) * (cw - 1) / (s.w - 1) : 0.0;
        const std::int64_t ix = std::min<std::int64_t>(static_cast<std::int64_t>(sx), cw - 2 >= 0 ? cw - 2 : 0);
        const double fx = sx - ix;
        const float* p00 = plane + (y0 + iy) * s.w + (x0 + ix);
        const double v = (1 - fy) * ((1 - fx) * p00[0] + fx * p00[1]) +
                         fy * ((1 - fx) * p00[s.w] + fx * p00[s.w + 1]);
        oplane[y * s.w + x] = static_cast<float>(v);
      }
    }
  }
  return out;
}

}  // namespace

ImagePair augment(const ImagePair& pair, std::uint64_t seed, const AugmentOptions& options) {
  if (!options.enabled) return pair;
  const Shape s = pair.sharp.shape();
  Pcg32 rng(mix_seed(seed, 0xau));

  ImagePair out = pair;
  if (rng.next_below(2) == 1) {
    out.blurry = hflip(out.blurry);
    out.sharp = hflip(out.sharp);
  }
  const double scale = rng.uniform(options.min_crop_scale, 1.0);
  const std::int64_t ch = std::max<std::int64_t>(2, static_cast<std::int64_t>(scale * s.h));
  const std::int64_t cw = std::max<std::int64_t>(2, static_cast<std::int64_t>(scale * s.w));
  if (ch < s.h || cw < s.w) {
    const std::int64_t y0 = rng.next_below(static_cast<std::uint32_t>(s.h - ch + 1));
    const std::int64_t x0 = rng.next_below(static_cast<std::uint32_t>(s.w - cw + 1));
    out.blurry = crop_resize(out.blurry, y0, x0, ch, cw);
    out.sharp = crop_resize(out.sharp, y0, x0, ch, cw);
  }
  return out;
}

}  // namespace deblur
