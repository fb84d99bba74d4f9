#pragma once

#include <functional>
#include <string>

#include "deblur/core/rng.hpp"
#include "deblur/core/tensor.hpp"

namespace deblur {

struct LossWeights {
  float lambda_cyc = 10.0f;
  float lambda_perc = 100.0f;
  float lambda_gp = 10.0f;

  void validate() const;
};

// A critic as seen by the loss layer: any map from a batch to a scalar
// score (mean patch-map score for the PatchGAN critics, plain functions in
// tests).
using CriticFn = std::function<Tensor(const Tensor&)>;

// mean|rec_blur - x| + mean|rec_sharp - y|
Tensor cycle_loss(const Tensor& x, const Tensor& y, const Tensor& rec_blur,
                  const Tensor& rec_sharp);

// D(fake) - D(real) + lambda_gp * GP, with
// GP = mean_n (||grad_u D(u)||_2 - 1)^2 at u = eps*real + (1-eps)*fake,
// eps drawn uniformly per sample. `fake` must be detached from the
// generator. The gradient norm is taken over all elements of each sample.
struct CriticLossParts {
  Tensor total;
  float score_real = 0.0f;
  float score_fake = 0.0f;
  float penalty = 0.0f;
};
CriticLossParts critic_loss(const CriticFn& critic, const Tensor& real, const Tensor& fake,
                            float lambda_gp, Pcg32& rng);

// -D(fake); the caller sums both generator directions.
Tensor generator_adv_loss(const CriticFn& critic, const Tensor& fake);

// Frozen convolutional feature stack standing in for an externally trained
// feature extractor. Three 3x3 conv layers (image->16->32 channels, strides
// 1-2-1, ReLU); tap selects how many stages contribute to the output.
class FeatureExtractor {
 public:
  FeatureExtractor(std::int64_t image_channels, std::uint64_t seed, int tap = 3);

  // Loads weights from a checkpoint-format tensor table containing
  // fe.conv1..fe.conv3 weight/bias entries.
  static FeatureExtractor from_file(const std::string& path, int tap = 3);

  Tensor features(const Tensor& image) const;
  int tap() const { return tap_; }

 private:
  FeatureExtractor() = default;
  int tap_ = 3;
  Tensor w1_, b1_, w2_, b2_, w3_, b3_;
};

// sum_{c,w,h} (phi(sharp) - phi(restored))^2 / (W*H), averaged over the
// batch; W,H are the spatial size of the tapped feature map.
Tensor perceptual_loss(const FeatureExtractor& extractor, const Tensor& restored,
                       const Tensor& sharp);

// adv + lambda_cyc * cycle + lambda_perc * perceptual. Pass an undefined
// perceptual tensor when the term is disabled.
Tensor total_generator_loss(const Tensor& adv, const Tensor& cycle, const Tensor& perceptual,
                            const LossWeights& weights);

}  // namespace deblur
