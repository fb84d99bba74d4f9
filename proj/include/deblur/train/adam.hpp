#pragma once

#include <functional>
#include <string>
#include <vector>

#include "deblur/core/tensor.hpp"

namespace deblur {

// Bias-corrected Adam update on one tensor. `mask`, when given, zeroes
// pruned gradient entries before the moment update so masked weights stay
// exactly zero.
void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, std::int64_t t,
                 double lr, double beta1, double beta2, double epsilon,
                 const Tensor* mask = nullptr);

class Adam {
 public:
  Adam(double beta1 = 0.5, double beta2 = 0.999, double epsilon = 1e-8);

  void add_param(const std::string& name, Tensor param, Tensor mask = Tensor());
  // One update over every registered parameter that has a gradient.
  void step(double lr);
  void zero_grad();

  std::int64_t step_count() const { return t_; }
  void set_step_count(std::int64_t t) { t_ = t; }

  void visit_state(const std::string& prefix,
                   const std::function<void(const std::string&, Tensor&)>& visit);

 private:
  struct Slot {
    std::string name;
    Tensor param;
    Tensor m, v;
    Tensor mask;  // undefined when dense
  };
  double beta1_, beta2_, epsilon_;
  std::int64_t t_ = 0;
  std::vector<Slot> slots_;
};

}  // namespace deblur
