#include "deblur/nets/networks.hpp"

#include <cmath>
#include <stdexcept>

#include "deblur/core/rng.hpp"
#include "deblur/train/checkpoint.hpp"

namespace deblur {

void NetworkSpec::validate() const {
  if (base_channels < 1) throw std::invalid_argument("NetworkSpec: base_channels must be >= 1");
  if (n_res_blocks < 1) throw std::invalid_argument("NetworkSpec: n_res_blocks must be >= 1");
  if (image_channels < 1) throw std::invalid_argument("NetworkSpec: image_channels must be >= 1");
  if (!sparse_res_blocks && kwinner) {
    throw std::invalid_argument(
        "NetworkSpec: kwinner requires sparse_res_blocks (k-winner is only defined inside "
        "sparse residual blocks)");
  }
  if (!(activation_density > 0.0 && activation_density <= 1.0)) {
    throw std::invalid_argument("NetworkSpec: activation_density outside (0, 1]");
  }
  if (!(weight_density > 0.0 && weight_density <= 1.0)) {
    throw std::invalid_argument("NetworkSpec: weight_density outside (0, 1]");
  }
}

Tensor Conv2dLayer::forward(const Tensor& x) const {
  return conv2d(x, weight, bias.defined() ? std::optional<Tensor>(bias) : std::nullopt, stride,
                padding);
}

void Conv2dLayer::enforce_mask() {
  if (mask) apply_weight_mask(weight, *mask);
}

namespace {

// CycleGAN-style init: zero-mean Gaussian sigma=0.02, zero biases.
Tensor gaussian_weight(Shape shape, Pcg32& rng, double sigma = 0.02) {
  Tensor w = Tensor::zeros(shape, true);
  auto p = w.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = static_cast<float>(sigma * rng.next_gaussian());
  }
  return w;
}

Conv2dLayer make_conv(std::int64_t cin, std::int64_t cout, std::int64_t k, std::int64_t stride,
                      PadSpec pad, Pcg32& rng) {
  Conv2dLayer layer;
  layer.weight = gaussian_weight({cout, cin, k, k}, rng);
  layer.bias = Tensor::zeros({1, cout, 1, 1}, true);
  layer.stride = stride;
  layer.padding = pad;
  return layer;
}

// Transposed conv stores its weight as Cin x Cout x K x K.
Conv2dLayer make_deconv(std::int64_t cin, std::int64_t cout, std::int64_t k, std::int64_t stride,
                        std::int64_t pad, Pcg32& rng) {
  Conv2dLayer layer;
  layer.weight = gaussian_weight({cin, cout, k, k}, rng);
  layer.bias = Tensor::zeros({1, cout, 1, 1}, true);
  layer.stride = stride;
  layer.padding = {PadMode::kZero, pad};
  return layer;
}

InstanceNorm2d make_norm(std::int64_t channels) {
  InstanceNorm2d norm;
  norm.gamma = Tensor::full({1, channels, 1, 1}, 1.0f, true);
  norm.beta = Tensor::zeros({1, channels, 1, 1}, true);
  return norm;
}

void visit_conv(const std::string& prefix, Conv2dLayer& layer, const ParamVisitor& visit) {
  visit(prefix + ".weight", layer.weight);
  visit(prefix + ".bias", layer.bias);
}

void visit_norm(const std::string& prefix, InstanceNorm2d& norm, const ParamVisitor& visit) {
  visit(prefix + ".gamma", norm.gamma);
  visit(prefix + ".beta", norm.beta);
}

}  // namespace

Tensor ResBlock::forward(const Tensor& x, bool training) {
  Tensor h = norm1.forward(conv1.forward(x));
  if (use_kwinner) {
    if (!kwinner_state) {
      const Shape s = h.shape();
      kwinner_state = std::make_unique<KWinnerState>(KWinnerState::from_density(
          s.c * s.h * s.w, activation_density, boost_strength, duty_decay));
    }
    kwinner_state->set_training_mode(training);
    h = kwinner_forward(h, *kwinner_state);
  } else {
    h = relu(h);
  }
  h = norm2.forward(conv2.forward(h));
  return add(x, h);
}

Generator::Generator(const NetworkSpec& spec) : spec_(spec) {
  spec_.validate();
  Pcg32 rng(mix_seed(spec_.seed, 0xa11ce));
  const std::int64_t f = spec_.base_channels;
  const std::int64_t img = spec_.image_channels;

  enc1_ = make_conv(img, f, 7, 1, {PadMode::kReflect, 3}, rng);
  enc1_norm_ = make_norm(f);
  enc2_ = make_conv(f, 2 * f, 3, 2, {PadMode::kZero, 1}, rng);
  enc2_norm_ = make_norm(2 * f);
  enc3_ = make_conv(2 * f, 4 * f, 3, 2, {PadMode::kZero, 1}, rng);
  enc3_norm_ = make_norm(4 * f);

  blocks_.resize(static_cast<std::size_t>(spec_.n_res_blocks));
  for (std::int64_t b = 0; b < spec_.n_res_blocks; ++b) {
    ResBlock& block = blocks_[static_cast<std::size_t>(b)];
    block.conv1 = make_conv(4 * f, 4 * f, 3, 1, {PadMode::kReflect, 1}, rng);
    block.conv2 = make_conv(4 * f, 4 * f, 3, 1, {PadMode::kReflect, 1}, rng);
    block.norm1 = make_norm(4 * f);
    block.norm2 = make_norm(4 * f);
    if (spec_.sparse_res_blocks) {
      block.conv1.mask = init_sparse_mask(block.conv1.weight.shape(), spec_.weight_density,
                                          mix_seed(spec_.seed, 2 * b + 1));
      block.conv2.mask = init_sparse_mask(block.conv2.weight.shape(), spec_.weight_density,
                                          mix_seed(spec_.seed, 2 * b + 2));
      block.conv1.enforce_mask();
      block.conv2.enforce_mask();
    }
    block.use_kwinner = spec_.kwinner;
    block.activation_density = spec_.activation_density;
    block.boost_strength = spec_.boost_strength;
    block.duty_decay = spec_.duty_decay;
  }

  dec1_ = make_deconv(4 * f, 2 * f, 3, 2, 1, rng);
  dec1_norm_ = make_norm(2 * f);
  dec2_ = make_deconv(2 * f, f, 3, 2, 1, rng);
  dec2_norm_ = make_norm(f);
  out_ = make_conv(f, img, 7, 1, {PadMode::kReflect, 3}, rng);
}

Tensor Generator::forward(const Tensor& x, bool training) {
  const Shape s = x.shape();
  if (s.c != spec_.image_channels) {
    throw std::invalid_argument("generator: input has " + std::to_string(s.c) +
                                " channels, spec expects " +
                                std::to_string(spec_.image_channels));
  }
  if (s.h % 4 != 0 || s.w % 4 != 0) {
    throw std::invalid_argument("generator: input spatial size " + std::to_string(s.h) + "x" +
                                std::to_string(s.w) + " not divisible by 4");
  }
  Tensor h = relu(enc1_norm_.forward(enc1_.forward(x)));
  h = relu(enc2_norm_.forward(enc2_.forward(h)));
  h = relu(enc3_norm_.forward(enc3_.forward(h)));
  for (ResBlock& block : blocks_) h = block.forward(h, training);
  h = conv_transpose2d(h, dec1_.weight, dec1_.stride, dec1_.padding.size, 1);
  h = add(h, broadcast_channel(dec1_.bias, h.shape()));
  h = relu(dec1_norm_.forward(h));
  h = conv_transpose2d(h, dec2_.weight, dec2_.stride, dec2_.padding.size, 1);
  h = add(h, broadcast_channel(dec2_.bias, h.shape()));
  h = relu(dec2_norm_.forward(h));
  return tanh(out_.forward(h));
}

void Generator::visit_params(const ParamVisitor& visit) {
  visit_conv("enc1", enc1_, visit);
  visit_norm("enc1_norm", enc1_norm_, visit);
  visit_conv("enc2", enc2_, visit);
  visit_norm("enc2_norm", enc2_norm_, visit);
  visit_conv("enc3", enc3_, visit);
  visit_norm("enc3_norm", enc3_norm_, visit);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const std::string p = "res" + std::to_string(b);
    visit_conv(p + ".conv1", blocks_[b].conv1, visit);
    visit_norm(p + ".norm1", blocks_[b].norm1, visit);
    visit_conv(p + ".conv2", blocks_[b].conv2, visit);
    visit_norm(p + ".norm2", blocks_[b].norm2, visit);
  }
  visit_conv("dec1", dec1_, visit);
  visit_norm("dec1_norm", dec1_norm_, visit);
  visit_conv("dec2", dec2_, visit);
  visit_norm("dec2_norm", dec2_norm_, visit);
  visit_conv("out", out_, visit);
}

void Generator::visit_state(const StateVisitor& visit) {
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    ResBlock& block = blocks_[b];
    const std::string p = "res" + std::to_string(b);
    if (block.conv1.mask) {
      auto pm = block.conv1.mask->data();
      visit(p + ".conv1.mask", std::vector<float>(pm.begin(), pm.end()),
            [&block](const std::vector<float>& v) {
              auto dst = block.conv1.mask->data();
              std::copy(v.begin(), v.end(), dst.begin());
            });
    }
    if (block.conv2.mask) {
      auto pm = block.conv2.mask->data();
      visit(p + ".conv2.mask", std::vector<float>(pm.begin(), pm.end()),
            [&block](const std::vector<float>& v) {
              auto dst = block.conv2.mask->data();
              std::copy(v.begin(), v.end(), dst.begin());
            });
    }
    if (block.use_kwinner) {
      // exact-bit encoding keeps resumed runs on the identical trajectory
      std::vector<float> packed;
      if (block.kwinner_state) packed = pack_doubles(block.kwinner_state->duty_cycles());
      visit(p + ".kwinner.duty", std::move(packed), [&block](const std::vector<float>& v) {
        std::vector<double> duty = unpack_doubles(v);
        if (!block.kwinner_state) {
          block.kwinner_state = std::make_unique<KWinnerState>(KWinnerState::from_density(
              static_cast<std::int64_t>(duty.size()), block.activation_density,
              block.boost_strength, block.duty_decay));
        }
        block.kwinner_state->set_duty_cycles(std::move(duty));
      });
    }
  }
}

void Generator::enforce_masks() {
  for (ResBlock& block : blocks_) {
    block.conv1.enforce_mask();
    block.conv2.enforce_mask();
  }
}

std::vector<std::pair<std::string, Tensor>> Generator::weight_masks() {
  std::vector<std::pair<std::string, Tensor>> masks;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const std::string p = "res" + std::to_string(b);
    if (blocks_[b].conv1.mask) masks.emplace_back(p + ".conv1.weight", *blocks_[b].conv1.mask);
    if (blocks_[b].conv2.mask) masks.emplace_back(p + ".conv2.weight", *blocks_[b].conv2.mask);
  }
  return masks;
}

std::int64_t Generator::parameter_count() {
  std::int64_t count = 0;
  visit_params([&count](const std::string&, Tensor& p) { count += p.numel(); });
  return count;
}

Critic::Critic(const NetworkSpec& spec) {
  spec.validate();
  Pcg32 rng(mix_seed(spec.seed, 0xc417));
  const std::int64_t f = spec.base_channels;
  c1_ = make_conv(spec.image_channels, f, 4, 2, {PadMode::kZero, 1}, rng);
  c2_ = make_conv(f, 2 * f, 4, 2, {PadMode::kZero, 1}, rng);
  n2_ = make_norm(2 * f);
  c3_ = make_conv(2 * f, 4 * f, 4, 2, {PadMode::kZero, 1}, rng);
  n3_ = make_norm(4 * f);
  c4_ = make_conv(4 * f, 8 * f, 4, 1, {PadMode::kZero, 1}, rng);
  n4_ = make_norm(8 * f);
  c5_ = make_conv(8 * f, 1, 4, 1, {PadMode::kZero, 1}, rng);
}

Tensor Critic::patch_map(const Tensor& x) const {
  Tensor h = leaky_relu(c1_.forward(x), 0.2f);
  h = leaky_relu(n2_.forward(c2_.forward(h)), 0.2f);
  h = leaky_relu(n3_.forward(c3_.forward(h)), 0.2f);
  h = leaky_relu(n4_.forward(c4_.forward(h)), 0.2f);
  return c5_.forward(h);
}

Tensor Critic::sample_scores(const Tensor& x) const {
  Tensor map = patch_map(x);
  const Shape s = map.shape();
  return scale(sum_per_sample(map), 1.0f / static_cast<float>(s.c * s.h * s.w));
}

Tensor Critic::score(const Tensor& x) const { return mean_all(patch_map(x)); }

void Critic::visit_params(const ParamVisitor& visit) {
  visit_conv("c1", c1_, visit);
  visit_conv("c2", c2_, visit);
  visit_norm("n2", n2_, visit);
  visit_conv("c3", c3_, visit);
  visit_norm("n3", n3_, visit);
  visit_conv("c4", c4_, visit);
  visit_norm("n4", n4_, visit);
  visit_conv("c5", c5_, visit);
}

std::int64_t Critic::parameter_count() {
  std::int64_t count = 0;
  visit_params([&count](const std::string&, Tensor& p) { count += p.numel(); });
  return count;
}

GeneratorPair::GeneratorPair(const NetworkSpec& spec)
    : blur_to_sharp(spec), sharp_to_blur([&spec] {
        NetworkSpec s = spec;
        s.seed = mix_seed(spec.seed, 0x9b);
        return s;
      }()) {}

CriticPair::CriticPair(const NetworkSpec& spec)
    : blur_domain(spec), sharp_domain([&spec] {
        NetworkSpec s = spec;
        s.seed = mix_seed(spec.seed, 0xd5);
        return s;
      }()) {}

CycleOutputs forward_cycle(const std::function<Tensor(const Tensor&)>& g_x,
                           const std::function<Tensor(const Tensor&)>& g_y,
                           const Tensor& x, const Tensor& y) {
  CycleOutputs out;
  out.fake_sharp = g_x(x);
  out.fake_blur = g_y(y);
  out.rec_blur = g_y(out.fake_sharp);
  out.rec_sharp = g_x(out.fake_blur);
  return out;
}

}  // namespace deblur
