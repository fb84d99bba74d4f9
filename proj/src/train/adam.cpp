#include "deblur/train/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace deblur {

void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, std::int64_t t,
                 double lr, double beta1, double beta2, double epsilon, const Tensor* mask) {
  check_same_shape(param, grad, "adam_update");
  check_same_shape(param, m, "adam_update");
  check_same_shape(param, v, "adam_update");
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  auto pp = param.data();
  auto pg = grad.data();
  auto pm = m.data();
  auto pv = v.data();
  const float* pk = mask ? mask->data().data() : nullptr;
  for (std::size_t i = 0; i < pp.size(); ++i) {
    float g = pg[i];
    if (pk) g *= pk[i];
    pm[i] = static_cast<float>(beta1 * pm[i] + (1.0 - beta1) * g);
    pv[i] = static_cast<float>(beta2 * pv[i] + (1.0 - beta2) * static_cast<double>(g) * g);
    const double m_hat = pm[i] / bc1;
    const double v_hat = pv[i] / bc2;
    pp[i] = static_cast<float>(pp[i] - lr * m_hat / (std::sqrt(v_hat) + epsilon));
  }
}

Adam::Adam(double beta1, double beta2, double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam: betas must be in [0, 1)");
  }
}

void Adam::add_param(const std::string& name, Tensor param, Tensor mask) {
  Slot slot;
  slot.name = name;
  slot.param = param;
  slot.m = Tensor::zeros(param.shape());
  slot.v = Tensor::zeros(param.shape());
  slot.mask = mask;
  slots_.push_back(std::move(slot));
}

void Adam::step(double lr) {
  ++t_;
  for (Slot& slot : slots_) {
    Tensor g = slot.param.grad();
    if (!g.defined()) continue;
    adam_update(slot.param, g, slot.m, slot.v, t_, lr, beta1_, beta2_, epsilon_,
                slot.mask.defined() ? &slot.mask : nullptr);
    // keep pruned weights exactly zero
    if (slot.mask.defined()) {
      auto pp = slot.param.data();
      auto pk = slot.mask.data();
      for (std::size_t i = 0; i < pp.size(); ++i) pp[i] *= pk[i];
    }
  }
}

void Adam::zero_grad() {
  for (Slot& slot : slots_) slot.param.zero_grad();
}

void Adam::visit_state(const std::string& prefix,
                       const std::function<void(const std::string&, Tensor&)>& visit) {
  for (Slot& slot : slots_) {
    visit(prefix + "." + slot.name + ".m", slot.m);
    visit(prefix + "." + slot.name + ".v", slot.v);
  }
}

}  // namespace deblur
