#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "deblur/core/ops.hpp"
#include "deblur/core/tensor.hpp"
#include "deblur/sparse/sparse.hpp"

namespace deblur {

struct NetworkSpec {
  std::int64_t base_channels = 8;   // F
  std::int64_t n_res_blocks = 3;
  std::int64_t image_channels = 3;
  bool sparse_res_blocks = true;
  bool kwinner = true;
  double activation_density = 0.3;
  double weight_density = 0.5;
  double boost_strength = 1.5;
  double duty_decay = 0.001;
  std::uint64_t seed = 1;

  void validate() const;
};

// Visitor over named parameters; `name` is stable across runs and used by
// the checkpoint format.
using ParamVisitor = std::function<void(const std::string& name, Tensor& param)>;
// Masks and duty cycles travel through checkpoints as named tensors too.
using StateVisitor = std::function<void(const std::string& name, std::vector<float> values,
                                        std::function<void(const std::vector<float>&)> restore)>;

struct Conv2dLayer {
  Tensor weight;  // Cout x Cin x Kh x Kw
  Tensor bias;    // 1 x Cout x 1 x 1
  std::int64_t stride = 1;
  PadSpec padding;
  std::optional<Tensor> mask;  // fixed binary sparsity pattern

  Tensor forward(const Tensor& x) const;
  void enforce_mask();
};

struct InstanceNorm2d {
  Tensor gamma;  // 1 x C x 1 x 1
  Tensor beta;
  float epsilon = 1e-5f;

  Tensor forward(const Tensor& x) const { return instance_norm(x, gamma, beta, epsilon); }
};

// Residual block. Dense variant: x + IN(Conv(ReLU(IN(Conv(x))))).
// Sparse variant replaces both convs with masked convs and the ReLU with
// the k-winner activation.
struct ResBlock {
  Conv2dLayer conv1, conv2;
  InstanceNorm2d norm1, norm2;
  bool use_kwinner = false;
  double activation_density = 0.3;
  double boost_strength = 1.5;
  double duty_decay = 0.001;
  std::unique_ptr<KWinnerState> kwinner_state;  // sized on first forward

  Tensor forward(const Tensor& x, bool training);
};

class Generator {
 public:
  explicit Generator(const NetworkSpec& spec);

  // Input and output are NxCxHxW in [-1, 1]; H and W must be divisible by 4.
  Tensor forward(const Tensor& x, bool training);
  Tensor operator()(const Tensor& x) { return forward(x, training_); }

  void set_training(bool training) { training_ = training; }
  bool training() const { return training_; }

  void visit_params(const ParamVisitor& visit);
  void visit_state(const StateVisitor& visit);
  void enforce_masks();
  std::int64_t parameter_count();
  // (param name, mask) for every masked weight, e.g. ("res0.conv1.weight", ...).
  std::vector<std::pair<std::string, Tensor>> weight_masks();

  const NetworkSpec& spec() const { return spec_; }

 private:
  NetworkSpec spec_;
  bool training_ = true;
  Conv2dLayer enc1_, enc2_, enc3_;
  InstanceNorm2d enc1_norm_, enc2_norm_, enc3_norm_;
  std::vector<ResBlock> blocks_;
  Conv2dLayer dec1_, dec2_;  // transposed convs (weight laid out Cin x Cout x K x K)
  InstanceNorm2d dec1_norm_, dec2_norm_;
  Conv2dLayer out_;
};

class Critic {
 public:
  explicit Critic(const NetworkSpec& spec);

  // Returns the N x 1 x Hp x Wp patch map (no final nonlinearity).
  Tensor patch_map(const Tensor& x) const;
  // Per-sample score: mean of the patch map, shape N x 1 x 1 x 1.
  Tensor sample_scores(const Tensor& x) const;
  // Batch scalar score: mean over samples and patches.
  Tensor score(const Tensor& x) const;

  void visit_params(const ParamVisitor& visit);
  std::int64_t parameter_count();

 private:
  Conv2dLayer c1_, c2_, c3_, c4_, c5_;
  InstanceNorm2d n2_, n3_, n4_;
};

struct GeneratorPair {
  Generator blur_to_sharp;  // G_X
  Generator sharp_to_blur;  // G_Y

  explicit GeneratorPair(const NetworkSpec& spec);
};

struct CriticPair {
  Critic blur_domain;   // D_X
  Critic sharp_domain;  // D_Y

  explicit CriticPair(const NetworkSpec& spec);
};

struct CycleOutputs {
  Tensor fake_sharp;   // G_X(x)
  Tensor fake_blur;    // G_Y(y)
  Tensor rec_blur;     // G_Y(G_X(x))
  Tensor rec_sharp;    // G_X(G_Y(y))
};

// Runs both translation directions and both reconstructions on one
// computation record so a single backward covers all four outputs.
CycleOutputs forward_cycle(const std::function<Tensor(const Tensor&)>& g_x,
                           const std::function<Tensor(const Tensor&)>& g_y,
                           const Tensor& x, const Tensor& y);

}  // namespace deblur
