#include "deblur/loss/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "deblur/core/ops.hpp"
#include "deblur/train/checkpoint.hpp"

namespace deblur {

void LossWeights::validate() const {
  if (lambda_cyc < 0.0f || lambda_perc < 0.0f || lambda_gp < 0.0f) {
    throw std::invalid_argument("LossWeights: weights must be non-negative");
  }
}

Tensor cycle_loss(const Tensor& x, const Tensor& y, const Tensor& rec_blur,
                  const Tensor& rec_sharp) {
  check_same_shape(x, rec_blur, "cycle_loss");
  check_same_shape(y, rec_sharp, "cycle_loss");
  return add(l1_mean(rec_blur, x), l1_mean(rec_sharp, y));
}

CriticLossParts critic_loss(const CriticFn& critic, const Tensor& real, const Tensor& fake,
                            float lambda_gp, Pcg32& rng) {
  check_same_shape(real, fake, "critic_loss");
  const Shape s = real.shape();

  Tensor score_real = critic(real);
  Tensor score_fake = critic(fake);

  // interpolate per sample: u = eps*real + (1-eps)*fake
  Tensor interp = Tensor::zeros(s);
  {
    auto pr = real.data();
    auto pf = fake.data();
    auto pu = interp.data();
    const std::int64_t per_sample = s.c * s.h * s.w;
    for (std::int64_t n = 0; n < s.n; ++n) {
      const float eps = static_cast<float>(rng.next_double());
      float* u = pu.data() + n * per_sample;
      const float* r = pr.data() + n * per_sample;
      const float* f = pf.data() + n * per_sample;
      for (std::int64_t i = 0; i < per_sample; ++i) u[i] = eps * r[i] + (1.0f - eps) * f[i];
    }
  }
  interp.set_requires_grad(true);

  // The critic score here must sum per-sample scores (not average) so each
  // sample's input gradient is independent of the batch size.
  Tensor interp_score = sum_all(critic(interp));
  Tensor input_grad = grad(interp_score, {interp}, /*create_graph=*/true)[0];

  Tensor sq_norms = sum_per_sample(mul(input_grad, input_grad));
  Tensor norms = pow_scalar(add_scalar(sq_norms, 1e-12f), 0.5f);
  Tensor deficit = add_scalar(norms, -1.0f);
  Tensor penalty = scale(sum_all(mul(deficit, deficit)), 1.0f / static_cast<float>(s.n));

  Tensor total = add(sub(score_fake, score_real), scale(penalty, lambda_gp));
  CriticLossParts parts;
  parts.total = total;
  parts.score_real = score_real.item();
  parts.score_fake = score_fake.item();
  parts.penalty = penalty.item();
  return parts;
}

Tensor generator_adv_loss(const CriticFn& critic, const Tensor& fake) {
  return scale(critic(fake), -1.0f);
}

namespace {

Tensor he_weight(Shape shape, Pcg32& rng) {
  Tensor w = Tensor::zeros(shape);
  const double fan_in = static_cast<double>(shape.c * shape.h * shape.w);
  const double sigma = std::sqrt(2.0 / fan_in);
  auto p = w.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = static_cast<float>(sigma * rng.next_gaussian());
  }
  return w;
}

}  // namespace

FeatureExtractor::FeatureExtractor(std::int64_t image_channels, std::uint64_t seed, int tap)
    : tap_(tap) {
  if (tap < 1 || tap > 3) throw std::invalid_argument("FeatureExtractor: tap must be in [1, 3]");
  Pcg32 rng(mix_seed(seed, 0xfe47));
  w1_ = he_weight({16, image_channels, 3, 3}, rng);
  b1_ = Tensor::zeros({1, 16, 1, 1});
  w2_ = he_weight({32, 16, 3, 3}, rng);
  b2_ = Tensor::zeros({1, 32, 1, 1});
  w3_ = he_weight({32, 32, 3, 3}, rng);
  b3_ = Tensor::zeros({1, 32, 1, 1});
}

FeatureExtractor FeatureExtractor::from_file(const std::string& path, int tap) {
  if (tap < 1 || tap > 3) throw std::invalid_argument("FeatureExtractor: tap must be in [1, 3]");
  TensorTable table = read_tensor_table(path);
  auto want = [&table, &path](const std::string& name) {
    auto it = table.entries.find(name);
    if (it == table.entries.end()) {
      throw std::runtime_error("feature extractor file " + path + ": missing tensor " + name);
    }
    return Tensor::from_data(it->second.shape, it->second.values);
  };
  FeatureExtractor fe;
  fe.tap_ = tap;
  fe.w1_ = want("fe.conv1.weight");
  fe.b1_ = want("fe.conv1.bias");
  fe.w2_ = want("fe.conv2.weight");
  fe.b2_ = want("fe.conv2.bias");
  fe.w3_ = want("fe.conv3.weight");
  fe.b3_ = want("fe.conv3.bias");
  return fe;
}

Tensor FeatureExtractor::features(const Tensor& image) const {
  Tensor h = relu(conv2d(image, w1_, b1_, 1, {PadMode::kZero, 1}));
  if (tap_ == 1) return h;
  h = relu(conv2d(h, w2_, b2_, 2, {PadMode::kZero, 1}));
  if (tap_ == 2) return h;
  return relu(conv2d(h, w3_, b3_, 1, {PadMode::kZero, 1}));
}

Tensor perceptual_loss(const FeatureExtractor& extractor, const Tensor& restored,
                       const Tensor& sharp) {
  check_same_shape(restored, sharp, "perceptual_loss");
  Tensor fr = extractor.features(restored);
  Tensor fs = extractor.features(sharp);
  Tensor d = sub(fs, fr);
  const Shape s = fr.shape();
  return scale(sum_all(mul(d, d)), 1.0f / static_cast<float>(s.h * s.w * s.n));
}

Tensor total_generator_loss(const Tensor& adv, const Tensor& cycle, const Tensor& perceptual,
                            const LossWeights& weights) {
  weights.validate();
  Tensor total = add(adv, scale(cycle, weights.lambda_cyc));
  if (perceptual.defined()) {
    total = add(total, scale(perceptual, weights.lambda_perc));
  }
  return total;
}

}  // namespace deblur
