#include "deblur/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "deblur/core/ops.hpp"
#include "deblur/train/checkpoint.hpp"

namespace deblur {

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("TrainConfig: negative epochs");
  if (decay_start_epoch < 0 || decay_start_epoch > epochs) {
    throw std::invalid_argument("TrainConfig: decay_start_epoch must be in [0, epochs]");
  }
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (n_critic < 1) throw std::invalid_argument("TrainConfig: n_critic must be >= 1");
  if (lr0 < 0.0) throw std::invalid_argument("TrainConfig: negative learning rate");
  if (save_interval < 1) throw std::invalid_argument("TrainConfig: save_interval must be >= 1");
  weights.validate();
}

double lr_at(int epoch, const TrainConfig& config) {
  if (epoch < 0 || epoch > config.epochs) {
    throw std::invalid_argument("lr_at: epoch " + std::to_string(epoch) + " outside [0, " +
                                std::to_string(config.epochs) + "]");
  }
  if (epoch < config.decay_start_epoch) return config.lr0;
  const double span = static_cast<double>(config.epochs - config.decay_start_epoch);
  if (span == 0.0) return 0.0;
  return config.lr0 * static_cast<double>(config.epochs - epoch) / span;
}

std::string loss_csv_row(int epoch, int step, const StepLosses& l) {
  char row[256];
  std::snprintf(row, sizeof(row), "%d,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", epoch, step,
                l.loss_g, l.loss_dx, l.loss_dy, l.cyc, l.perc, l.adv, l.gp);
  return row;
}

Tensor stack_batch(const std::vector<const Tensor*>& tensors) {
  if (tensors.empty()) throw std::invalid_argument("stack_batch: empty batch");
  const Shape s = tensors.front()->shape();
  Tensor out = Tensor::zeros({static_cast<std::int64_t>(tensors.size()) * s.n, s.c, s.h, s.w});
  auto po = out.data();
  std::int64_t offset = 0;
  for (const Tensor* t : tensors) {
    check_same_shape(*t, *tensors.front(), "stack_batch");
    auto p = t->data();
    std::copy(p.begin(), p.end(), po.begin() + offset);
    offset += static_cast<std::int64_t>(p.size());
  }
  return out;
}

Trainer::Trainer(const NetworkSpec& net_spec, const TrainConfig& config)
    : net_spec_(net_spec),
      config_(config),
      gens_(net_spec),
      critics_(net_spec),
      feature_extractor_(config.fe_weights.empty()
                             ? FeatureExtractor(net_spec.image_channels,
                                                mix_seed(config.seed, 0xfe), config.fe_tap)
                             : FeatureExtractor::from_file(config.fe_weights, config.fe_tap)),
      opt_gen_(config.adam_beta1, config.adam_beta2),
      opt_dx_(config.adam_beta1, config.adam_beta2),
      opt_dy_(config.adam_beta1, config.adam_beta2),
      rng_(mix_seed(config.seed, 0x7247)) {
  net_spec_.validate();
  config_.validate();
  build_optimizers();
}

void Trainer::build_optimizers() {
  auto register_gen = [this](const std::string& prefix, Generator& gen) {
    std::vector<std::pair<std::string, Tensor>> masks = gen.weight_masks();
    gen.visit_params([&](const std::string& name, Tensor& p) {
      Tensor mask;
      for (const auto& [mask_name, m] : masks) {
        if (mask_name == name) {
          mask = m;
          break;
        }
      }
      opt_gen_.add_param(prefix + "." + name, p, mask);
    });
  };
  register_gen("gx", gens_.blur_to_sharp);
  register_gen("gy", gens_.sharp_to_blur);
  critics_.blur_domain.visit_params([this](const std::string& name, Tensor& p) {
    opt_dx_.add_param("dx." + name, p);
  });
  critics_.sharp_domain.visit_params([this](const std::string& name, Tensor& p) {
    opt_dy_.add_param("dy." + name, p);
  });
}

namespace {

void require_finite(float value, const char* term) {
  if (!std::isfinite(value)) {
    throw std::runtime_error(std::string("train_step: non-finite loss term '") + term + "' (" +
                             std::to_string(value) + ")");
  }
}

}  // namespace

StepLosses Trainer::train_step(const Tensor& blurry, const Tensor& sharp) {
  check_same_shape(blurry, sharp, "train_step");
  const double lr = current_lr();
  StepLosses losses;

  Generator& g_x = gens_.blur_to_sharp;
  Generator& g_y = gens_.sharp_to_blur;

  // (1) translated samples for the critic updates; the critics must not
  // backpropagate into the generators, so these are detached.
  Tensor fake_sharp_detached, fake_blur_detached;
  {
    NoGradGuard no_grad;
    fake_sharp_detached = g_x.forward(blurry, /*training=*/true).detach();
    fake_blur_detached = g_y.forward(sharp, /*training=*/true).detach();
  }

  CriticFn d_x_score = [this](const Tensor& t) { return critics_.blur_domain.score(t); };
  CriticFn d_y_score = [this](const Tensor& t) { return critics_.sharp_domain.score(t); };

  // (2) critic updates
  for (int it = 0; it < config_.n_critic; ++it) {
    opt_dy_.zero_grad();
    CriticLossParts dy = critic_loss(d_y_score, sharp, fake_sharp_detached,
                                     config_.weights.lambda_gp, rng_);
    require_finite(dy.total.item(), "loss_dy");
    backward(dy.total);
    opt_dy_.step(lr);
    losses.loss_dy = dy.total.item();
    losses.gp += dy.penalty;

    opt_dx_.zero_grad();
    CriticLossParts dx = critic_loss(d_x_score, blurry, fake_blur_detached,
                                     config_.weights.lambda_gp, rng_);
    require_finite(dx.total.item(), "loss_dx");
    backward(dx.total);
    opt_dx_.step(lr);
    losses.loss_dx = dx.total.item();
    losses.gp += dx.penalty;
  }

  // (3) joint generator update on fresh cycle outputs
  opt_gen_.zero_grad();
  auto run_g_x = [&g_x](const Tensor& t) { return g_x.forward(t, /*training=*/true); };
  auto run_g_y = [&g_y](const Tensor& t) { return g_y.forward(t, /*training=*/true); };
  CycleOutputs cycle = forward_cycle(run_g_x, run_g_y, blurry, sharp);

  Tensor adv = add(generator_adv_loss(d_y_score, cycle.fake_sharp),
                   generator_adv_loss(d_x_score, cycle.fake_blur));
  Tensor cyc = cycle_loss(blurry, sharp, cycle.rec_blur, cycle.rec_sharp);
  Tensor perc;
  if (config_.perceptual) {
    perc = perceptual_loss(feature_extractor_, cycle.fake_sharp, sharp);
    if (config_.cycle_perceptual) {
      perc = add(perc, perceptual_loss(feature_extractor_, cycle.fake_blur, blurry));
    }
  }
  Tensor total = total_generator_loss(adv, cyc, perc, config_.weights);

  losses.adv = adv.item();
  losses.cyc = cyc.item();
  losses.perc = perc.defined() ? perc.item() : 0.0f;
  losses.loss_g = total.item();
  require_finite(losses.adv, "adv");
  require_finite(losses.cyc, "cyc");
  require_finite(losses.perc, "perc");
  require_finite(losses.gp, "gp");
  require_finite(losses.loss_g, "loss_g");

  backward(total);
  opt_gen_.step(lr);

  // (4) pruned connections stay exactly zero
  g_x.enforce_masks();
  g_y.enforce_masks();
  return losses;
}

void Trainer::run(const std::vector<ImagePair>& data, const std::string& out_dir,
                  std::ostream* csv) {
  if (data.empty()) throw std::invalid_argument("Trainer::run: empty dataset");
  namespace fs = std::filesystem;
  if (!out_dir.empty()) fs::create_directories(out_dir);

  std::vector<std::size_t> order(data.size());
  for (; epoch_ < config_.epochs; ++epoch_) {
    std::iota(order.begin(), order.end(), 0);
    // Fisher-Yates with the run generator; part of the checkpointed state
    for (std::size_t i = data.size(); i > 1; --i) {
      std::size_t j = rng_.next_below(static_cast<std::uint32_t>(i));
      std::swap(order[i - 1], order[j]);
    }

    int step = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config_.batch_size), ++step) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config_.batch_size));
      std::vector<ImagePair> augmented;
      std::vector<const Tensor*> blurs, sharps;
      for (std::size_t i = start; i < end; ++i) {
        const ImagePair& pair = data[order[i]];
        if (config_.augment) {
          augmented.push_back(augment(pair, rng_.next_u64()));
          blurs.push_back(&augmented.back().blurry);
          sharps.push_back(&augmented.back().sharp);
        } else {
          blurs.push_back(&pair.blurry);
          sharps.push_back(&pair.sharp);
        }
      }
      StepLosses losses = train_step(stack_batch(blurs), stack_batch(sharps));
      if (csv) (*csv) << loss_csv_row(epoch_, step, losses) << "\n";
    }

    const bool last = epoch_ + 1 == config_.epochs;
    if (!out_dir.empty() && ((epoch_ + 1) % config_.save_interval == 0 || last)) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_epoch%04d.bin", epoch_ + 1);
      save_checkpoint((fs::path(out_dir) / name).string());
      if (last) save_checkpoint((fs::path(out_dir) / "checkpoint_final.bin").string());
    }
  }
}

namespace {

std::vector<float> encode_netspec(const NetworkSpec& spec) {
  std::vector<float> meta = {
      static_cast<float>(spec.base_channels), static_cast<float>(spec.n_res_blocks),
      static_cast<float>(spec.image_channels), spec.sparse_res_blocks ? 1.0f : 0.0f,
      spec.kwinner ? 1.0f : 0.0f};
  std::vector<float> doubles =
      pack_doubles({spec.activation_density, spec.weight_density, spec.boost_strength,
                    spec.duty_decay});
  meta.insert(meta.end(), doubles.begin(), doubles.end());
  std::vector<float> seed = pack_u64s({spec.seed});
  meta.insert(meta.end(), seed.begin(), seed.end());
  return meta;
}

NetworkSpec decode_netspec(const std::vector<float>& meta) {
  if (meta.size() != 5 + 8 + 2) {
    throw std::runtime_error("checkpoint: meta.netspec has unexpected length " +
                             std::to_string(meta.size()));
  }
  NetworkSpec spec;
  spec.base_channels = static_cast<std::int64_t>(meta[0]);
  spec.n_res_blocks = static_cast<std::int64_t>(meta[1]);
  spec.image_channels = static_cast<std::int64_t>(meta[2]);
  spec.sparse_res_blocks = meta[3] != 0.0f;
  spec.kwinner = meta[4] != 0.0f;
  std::vector<double> doubles = unpack_doubles({meta.begin() + 5, meta.begin() + 13});
  spec.activation_density = doubles[0];
  spec.weight_density = doubles[1];
  spec.boost_strength = doubles[2];
  spec.duty_decay = doubles[3];
  spec.seed = unpack_u64s({meta.begin() + 13, meta.end()})[0];
  return spec;
}

void put_params(TensorTable& table, const std::string& prefix, Generator& gen) {
  gen.visit_params([&](const std::string& name, Tensor& p) {
    auto d = p.data();
    table.put(prefix + "." + name, p.shape(), std::vector<float>(d.begin(), d.end()));
  });
}

void put_params(TensorTable& table, const std::string& prefix, Critic& critic) {
  critic.visit_params([&](const std::string& name, Tensor& p) {
    auto d = p.data();
    table.put(prefix + "." + name, p.shape(), std::vector<float>(d.begin(), d.end()));
  });
}

void load_params(const TensorTable& table, const std::string& origin, const std::string& prefix,
                 auto& network) {
  network.visit_params([&](const std::string& name, Tensor& p) {
    const std::string full = prefix + "." + name;
    auto it = table.entries.find(full);
    if (it == table.entries.end()) {
      throw std::runtime_error(origin + ": missing parameter " + full);
    }
    if (!(it->second.shape == p.shape())) {
      throw std::runtime_error(origin + ": parameter " + full + " has shape " +
                               it->second.shape.str() + ", expected " + p.shape().str());
    }
    auto d = p.data();
    std::copy(it->second.values.begin(), it->second.values.end(), d.begin());
  });
}

void put_state(TensorTable& table, const std::string& prefix, Generator& gen) {
  gen.visit_state([&](const std::string& name, std::vector<float> values,
                      std::function<void(const std::vector<float>&)>) {
    if (values.empty()) return;  // k-winner state not materialized yet
    table.put_vector(prefix + "." + name, std::move(values));
  });
}

void load_state(const TensorTable& table, const std::string& prefix, Generator& gen) {
  gen.visit_state([&](const std::string& name, std::vector<float>,
                      std::function<void(const std::vector<float>&)> restore) {
    auto it = table.entries.find(prefix + "." + name);
    if (it != table.entries.end()) restore(it->second.values);
  });
}

}  // namespace

TensorTable checkpoint_table(Trainer& trainer) {
  TensorTable table;
  table.put_vector("meta.netspec", encode_netspec(trainer.net_spec()));
  table.put_scalar("trainer.epoch", static_cast<float>(trainer.epoch()));
  table.put_vector("trainer.rng", pack_u64s({trainer.rng().state(), trainer.rng().inc()}));

  Trainer& t = trainer;
  put_params(table, "gx", t.gen_blur_to_sharp());
  put_params(table, "gy", t.gen_sharp_to_blur());
  put_params(table, "dx", t.critic_blur());
  put_params(table, "dy", t.critic_sharp());
  put_state(table, "gx", t.gen_blur_to_sharp());
  put_state(table, "gy", t.gen_sharp_to_blur());
  return table;
}

void Trainer::save_checkpoint(const std::string& path) {
  TensorTable table = checkpoint_table(*this);
  auto put_opt = [&table](const std::string& prefix, Adam& opt) {
    table.put_scalar(prefix + ".t", static_cast<float>(opt.step_count()));
    opt.visit_state(prefix, [&table](const std::string& name, Tensor& m) {
      auto d = m.data();
      table.put(name, m.shape(), std::vector<float>(d.begin(), d.end()));
    });
  };
  put_opt("adam_g", opt_gen_);
  put_opt("adam_dx", opt_dx_);
  put_opt("adam_dy", opt_dy_);
  write_tensor_table(path, table);
}

std::unique_ptr<Trainer> Trainer::load_checkpoint(const std::string& path,
                                                  const TrainConfig& config) {
  TensorTable table = read_tensor_table(path);
  NetworkSpec spec = decode_netspec(table.at("meta.netspec").values);
  auto trainer = std::make_unique<Trainer>(spec, config);

  load_params(table, path, "gx", trainer->gens_.blur_to_sharp);
  load_params(table, path, "gy", trainer->gens_.sharp_to_blur);
  load_params(table, path, "dx", trainer->critics_.blur_domain);
  load_params(table, path, "dy", trainer->critics_.sharp_domain);
  load_state(table, "gx", trainer->gens_.blur_to_sharp);
  load_state(table, "gy", trainer->gens_.sharp_to_blur);

  auto load_opt = [&table, &path](const std::string& prefix, Adam& opt) {
    opt.set_step_count(static_cast<std::int64_t>(table.at(prefix + ".t").values.at(0)));
    opt.visit_state(prefix, [&table, &path](const std::string& name, Tensor& m) {
      auto it = table.entries.find(name);
      if (it == table.entries.end()) {
        throw std::runtime_error(path + ": missing optimizer state " + name);
      }
      if (!(it->second.shape == m.shape())) {
        throw std::runtime_error(path + ": optimizer state " + name + " has shape " +
                                 it->second.shape.str() + ", expected " + m.shape().str());
      }
      auto d = m.data();
      std::copy(it->second.values.begin(), it->second.values.end(), d.begin());
    });
  };
  load_opt("adam_g", trainer->opt_gen_);
  load_opt("adam_dx", trainer->opt_dx_);
  load_opt("adam_dy", trainer->opt_dy_);

  trainer->epoch_ = static_cast<int>(table.at("trainer.epoch").values.at(0));
  std::vector<std::uint64_t> rng_state = unpack_u64s(table.at("trainer.rng").values);
  if (rng_state.size() != 2) throw std::runtime_error(path + ": malformed trainer.rng");
  trainer->rng_.restore(rng_state[0], rng_state[1]);
  return trainer;
}

void Trainer::visit_all_params(const ParamVisitor& visit) {
  gens_.blur_to_sharp.visit_params(
      [&](const std::string& name, Tensor& p) { visit("gx." + name, p); });
  gens_.sharp_to_blur.visit_params(
      [&](const std::string& name, Tensor& p) { visit("gy." + name, p); });
  critics_.blur_domain.visit_params(
      [&](const std::string& name, Tensor& p) { visit("dx." + name, p); });
  critics_.sharp_domain.visit_params(
      [&](const std::string& name, Tensor& p) { visit("dy." + name, p); });
}

}  // namespace deblur
