#pragma once

#include <cstdint>
#include <vector>

#include "deblur/core/tensor.hpp"

namespace deblur {

// Fixed binary connectivity mask for a convolution weight. Each output
// channel keeps round(weight_density * Cin*Kh*Kw) connections (at least
// one), sampled without replacement. The mask is a pure function of
// (seed, shape, weight_density).
Tensor init_sparse_mask(const Shape& shape, double weight_density, std::uint64_t seed);

// weight <- weight (*) mask, in place. Called after init and after every
// optimizer step so pruned positions stay exactly zero.
void apply_weight_mask(Tensor& weight, const Tensor& mask);

// k-winner-take-all activation state. Duty cycles are exponential moving
// averages of how often each unit wins; boosting multiplies pre-activations
// by exp(boost_strength * (target_density - duty)) during selection so
// underused units win more often. Selection only: emitted values are always
// the raw inputs.
class KWinnerState {
 public:
  KWinnerState(std::int64_t n_units, std::int64_t k, double boost_strength, double decay);

  static KWinnerState from_density(std::int64_t n_units, double activation_density,
                                   double boost_strength, double decay);

  std::int64_t n_units() const { return n_units_; }
  std::int64_t k() const { return k_; }
  double target_density() const { return static_cast<double>(k_) / static_cast<double>(n_units_); }
  double boost_strength() const { return boost_strength_; }
  double decay() const { return decay_; }

  bool training_mode() const { return training_; }
  void set_training_mode(bool training) { training_ = training; }

  bool clamp_negative() const { return clamp_negative_; }
  void set_clamp_negative(bool v) { clamp_negative_ = v; }

  const std::vector<double>& duty_cycles() const { return duty_; }
  void set_duty_cycles(std::vector<double> duty);

  std::vector<double> boost_coefficients() const;  // b_i = exp(beta * (a_hat - c_i))

  // EMA update, averaged over the batch:
  // c_i <- (1 - alpha) * c_i + alpha * mean_n [i in winners[n]]
  void update_duty_cycles(const std::vector<std::vector<std::int64_t>>& winners_per_sample);

 private:
  std::int64_t n_units_;
  std::int64_t k_;
  double boost_strength_;
  double decay_;
  bool training_ = true;
  bool clamp_negative_ = false;
  std::vector<double> duty_;
};

// Keeps the k most active units per sample (by boosted value, ties broken
// toward the lowest flat index) and zeroes the rest. Gradient flows only
// through winner positions. In training mode duty cycles are updated
// afterwards; in evaluation mode boosting is bypassed and duty cycles stay
// frozen.
Tensor kwinner_forward(const Tensor& input, KWinnerState& state);

// Winner index sets of the most recent selection, exposed for inspection.
std::vector<std::vector<std::int64_t>> kwinner_select(const Tensor& input,
                                                      const KWinnerState& state);

}  // namespace deblur
