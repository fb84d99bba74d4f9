#include "deblur/sparse/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "deblur/core/ops.hpp"
#include "deblur/core/rng.hpp"

namespace deblur {

Tensor init_sparse_mask(const Shape& shape, double weight_density, std::uint64_t seed) {
  if (!(weight_density > 0.0 && weight_density <= 1.0)) {
    throw std::invalid_argument("init_sparse_mask: weight_density " +
                                std::to_string(weight_density) + " outside (0, 1]");
  }
  const std::int64_t fan_in = shape.c * shape.h * shape.w;
  std::int64_t keep = std::llround(weight_density * static_cast<double>(fan_in));
  keep = std::max<std::int64_t>(1, std::min(keep, fan_in));

  Tensor mask = Tensor::zeros(shape);
  auto pm = mask.data();
  // one independent stream per (seed, shape, density); channel index folded in
  std::uint64_t base = mix_seed(seed, mix_seed(static_cast<std::uint64_t>(shape.n) * 131 +
                                               static_cast<std::uint64_t>(fan_in),
                                               static_cast<std::uint64_t>(keep)));
  std::vector<std::int64_t> idx(static_cast<std::size_t>(fan_in));
  for (std::int64_t co = 0; co < shape.n; ++co) {
    Pcg32 rng(mix_seed(base, static_cast<std::uint64_t>(co)));
    std::iota(idx.begin(), idx.end(), 0);
    // partial Fisher-Yates: the first `keep` slots become the sample
    for (std::int64_t i = 0; i < keep; ++i) {
      std::int64_t j = i + static_cast<std::int64_t>(
                               rng.next_below(static_cast<std::uint32_t>(fan_in - i)));
      std::swap(idx[i], idx[j]);
      pm[co * fan_in + idx[i]] = 1.0f;
    }
  }
  return mask;
}

void apply_weight_mask(Tensor& weight, const Tensor& mask) {
  check_same_shape(weight, mask, "apply_weight_mask");
  auto pw = weight.data();
  auto pm = mask.data();
  for (std::size_t i = 0; i < pw.size(); ++i) pw[i] *= pm[i];
}

KWinnerState::KWinnerState(std::int64_t n_units, std::int64_t k, double boost_strength,
                           double decay)
    : n_units_(n_units), k_(k), boost_strength_(boost_strength), decay_(decay) {
  if (n_units < 1) throw std::invalid_argument("KWinnerState: n_units must be >= 1");
  if (k < 1 || k > n_units) {
    throw std::invalid_argument("KWinnerState: k=" + std::to_string(k) +
                                " outside [1, " + std::to_string(n_units) + "]");
  }
  if (boost_strength < 0.0) throw std::invalid_argument("KWinnerState: negative boost strength");
  if (!(decay > 0.0 && decay < 1.0)) {
    throw std::invalid_argument("KWinnerState: decay must be in (0, 1)");
  }
  duty_.assign(static_cast<std::size_t>(n_units), 0.0);
}

KWinnerState KWinnerState::from_density(std::int64_t n_units, double activation_density,
                                        double boost_strength, double decay) {
  if (!(activation_density > 0.0 && activation_density <= 1.0)) {
    throw std::invalid_argument("KWinnerState: activation_density outside (0, 1]");
  }
  std::int64_t k = std::llround(activation_density * static_cast<double>(n_units));
  k = std::max<std::int64_t>(1, std::min(k, n_units));
  return KWinnerState(n_units, k, boost_strength, decay);
}

void KWinnerState::set_duty_cycles(std::vector<double> duty) {
  if (static_cast<std::int64_t>(duty.size()) != n_units_) {
    throw std::invalid_argument("KWinnerState: duty cycle vector has " +
                                std::to_string(duty.size()) + " entries, expected " +
                                std::to_string(n_units_));
  }
  duty_ = std::move(duty);
}

std::vector<double> KWinnerState::boost_coefficients() const {
  const double a_hat = target_density();
  std::vector<double> b(duty_.size());
  for (std::size_t i = 0; i < duty_.size(); ++i) {
    b[i] = std::exp(boost_strength_ * (a_hat - duty_[i]));
  }
  return b;
}

void KWinnerState::update_duty_cycles(
    const std::vector<std::vector<std::int64_t>>& winners_per_sample) {
  if (winners_per_sample.empty()) return;
  std::vector<double> hit(duty_.size(), 0.0);
  for (const auto& winners : winners_per_sample) {
    for (std::int64_t i : winners) hit[static_cast<std::size_t>(i)] += 1.0;
  }
  const double inv_batch = 1.0 / static_cast<double>(winners_per_sample.size());
  for (std::size_t i = 0; i < duty_.size(); ++i) {
    duty_[i] = (1.0 - decay_) * duty_[i] + decay_ * hit[i] * inv_batch;
  }
}

namespace {

std::vector<std::int64_t> top_k_indices(const float* values, const std::vector<double>& boost,
                                        std::int64_t n, std::int64_t k, bool boosted) {
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  auto keyed = [&](std::int64_t i) {
    double v = static_cast<double>(values[i]);
    return boosted ? v * boost[static_cast<std::size_t>(i)] : v;
  };
  std::nth_element(order.begin(), order.begin() + (k - 1), order.end(),
                   [&](std::int64_t a, std::int64_t b) {
                     double ka = keyed(a), kb = keyed(b);
                     if (ka != kb) return ka > kb;
                     return a < b;  // ties: lowest flat index wins
                   });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace

std::vector<std::vector<std::int64_t>> kwinner_select(const Tensor& input,
                                                      const KWinnerState& state) {
  const Shape s = input.shape();
  const std::int64_t per_sample = s.c * s.h * s.w;
  if (per_sample != state.n_units()) {
    throw std::invalid_argument("kwinner: per-sample size " + std::to_string(per_sample) +
                                " does not match state n_units " +
                                std::to_string(state.n_units()));
  }
  const bool boosted = state.training_mode() && state.boost_strength() > 0.0;
  std::vector<double> boost;
  if (boosted) boost = state.boost_coefficients();
  auto px = input.data();
  std::vector<std::vector<std::int64_t>> winners;
  winners.reserve(static_cast<std::size_t>(s.n));
  for (std::int64_t n = 0; n < s.n; ++n) {
    winners.push_back(
        top_k_indices(px.data() + n * per_sample, boost, per_sample, state.k(), boosted));
  }
  return winners;
}

Tensor kwinner_forward(const Tensor& input, KWinnerState& state) {
  const Shape s = input.shape();
  const std::int64_t per_sample = s.c * s.h * s.w;
  auto winners = kwinner_select(input, state);

  Tensor mask = Tensor::zeros(s);
  auto pm = mask.data();
  for (std::int64_t n = 0; n < s.n; ++n) {
    for (std::int64_t i : winners[static_cast<std::size_t>(n)]) {
      pm[n * per_sample + i] = 1.0f;
    }
  }
  Tensor out = mask_mul(input, mask);
  if (state.clamp_negative()) out = relu(out);
  if (state.training_mode()) state.update_duty_cycles(winners);
  return out;
}

}  // namespace deblur
