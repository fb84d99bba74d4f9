#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "deblur/core/rng.hpp"
#include "deblur/data/dataset.hpp"
#include "deblur/loss/losses.hpp"
#include "deblur/nets/networks.hpp"
#include "deblur/train/adam.hpp"
#include "deblur/train/checkpoint.hpp"

namespace deblur {

struct TrainConfig {
  int epochs = 200;
  double lr0 = 2e-4;
  int decay_start_epoch = 100;
  int batch_size = 1;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int n_critic = 1;
  LossWeights weights;
  std::uint64_t seed = 1;
  // ablation switches (the network's sparse/kwinner flags live in NetworkSpec)
  bool perceptual = true;
  bool cycle_perceptual = false;  // symmetric blur-side perceptual term
  bool augment = false;
  int save_interval = 50;
  int fe_tap = 3;
  std::string fe_weights;  // optional external feature extractor (tensor table)

  void validate() const;
};

// lr0 until decay_start_epoch, then linear decay hitting zero at `epochs`.
double lr_at(int epoch, const TrainConfig& config);

struct StepLosses {
  float loss_g = 0.0f;
  float loss_dx = 0.0f;
  float loss_dy = 0.0f;
  float cyc = 0.0f;
  float perc = 0.0f;
  float adv = 0.0f;
  float gp = 0.0f;
};

inline constexpr const char* kLossCsvHeader = "epoch,step,loss_g,loss_dx,loss_dy,cyc,perc,adv,gp";
std::string loss_csv_row(int epoch, int step, const StepLosses& losses);

class Trainer {
 public:
  Trainer(const NetworkSpec& net_spec, const TrainConfig& config);

  // One alternating critic/generator iteration on a batch.
  StepLosses train_step(const Tensor& blurry, const Tensor& sharp);

  // Runs epochs [epoch(), config.epochs), writing one CSV row per step and
  // a checkpoint every save_interval epochs plus a final one.
  void run(const std::vector<ImagePair>& data, const std::string& out_dir, std::ostream* csv);

  int epoch() const { return epoch_; }
  double current_lr() const { return lr_at(epoch_, config_); }

  void save_checkpoint(const std::string& path);
  static std::unique_ptr<Trainer> load_checkpoint(const std::string& path,
                                                  const TrainConfig& config);

  Generator& gen_blur_to_sharp() { return gens_.blur_to_sharp; }
  Generator& gen_sharp_to_blur() { return gens_.sharp_to_blur; }
  Critic& critic_blur() { return critics_.blur_domain; }
  Critic& critic_sharp() { return critics_.sharp_domain; }
  const NetworkSpec& net_spec() const { return net_spec_; }
  const TrainConfig& config() const { return config_; }
  Pcg32& rng() { return rng_; }

  void visit_all_params(const ParamVisitor& visit);

 private:
  void build_optimizers();

  NetworkSpec net_spec_;
  TrainConfig config_;
  GeneratorPair gens_;
  CriticPair critics_;
  FeatureExtractor feature_extractor_;
  Adam opt_gen_, opt_dx_, opt_dy_;
  Pcg32 rng_;
  int epoch_ = 0;
};

// Stacks single-sample tensors along the batch dimension.
Tensor stack_batch(const std::vector<const Tensor*>& tensors);

// Builds the checkpoint from a trainer (exposed for tests that craft
// checkpoints directly).
TensorTable checkpoint_table(Trainer& trainer);

}  // namespace deblur
