#pragma once

#include <optional>
#include <string>
#include <vector>

#include "deblur/core/tensor.hpp"
#include "deblur/data/psf.hpp"

namespace deblur {

struct ImagePair {
  Tensor blurry;  // in [-1, 1]
  Tensor sharp;   // same shape
  std::string id;
  std::optional<MotionPSF> psf;
};

// Deterministic procedural sharp images (gradients, rectangles,
// checkerboards, oriented step edges) paired with their blurred versions.
// `size` must be divisible by 4. For blur lengths >= 3 the generator
// asserts that the blur measurably degrades each image.
std::vector<ImagePair> generate_synthetic_dataset(int n, std::int64_t size, const MotionPSF& psf,
                                                  std::uint64_t seed);

// Writes pairs as DIR/blur/<id>.ppm and DIR/sharp/<id>.ppm.
void save_dataset(const std::string& dir, const std::vector<ImagePair>& pairs);

// Loads filename-matched pairs from DIR/blur and DIR/sharp. Throws listing
// any unmatched filenames.
std::vector<ImagePair> load_paired_dirs(const std::string& dir);

// Lists the image files (*.ppm, *.pgm) in a directory, sorted by name.
std::vector<std::string> list_images(const std::string& dir);

struct AugmentOptions {
  bool enabled = true;
  double min_crop_scale = 0.8;
};

// Identical random horizontal flip and crop-then-resize applied to both
// images of the pair; a pure function of (pair, seed).
ImagePair augment(const ImagePair& pair, std::uint64_t seed,
                  const AugmentOptions& options = {});

}  // namespace deblur
