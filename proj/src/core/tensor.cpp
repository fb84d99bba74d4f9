#include "deblur/core/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace deblur {

namespace {
thread_local bool g_grad_enabled = true;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << n << "x" << c << "x" << h << "x" << w;
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape;
  impl->data.assign(static_cast<std::size_t>(shape.numel()), 0.0f);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  Tensor t = zeros(shape, requires_grad);
  std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<float> values, bool requires_grad) {
  if (static_cast<std::int64_t>(values.size()) != shape.numel()) {
    throw std::invalid_argument("Tensor::from_data: " + std::to_string(values.size()) +
                                " values for shape " + shape.str());
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape;
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(float value) { return full({1, 1, 1, 1}, value); }

const Shape& Tensor::shape() const {
  if (!impl_) throw std::runtime_error("Tensor: use of undefined tensor");
  return impl_->shape;
}

std::span<float> Tensor::data() {
  if (!impl_) throw std::runtime_error("Tensor: use of undefined tensor");
  return impl_->data;
}

std::span<const float> Tensor::data() const {
  if (!impl_) throw std::runtime_error("Tensor: use of undefined tensor");
  return impl_->data;
}

float Tensor::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("Tensor::item: tensor has " + std::to_string(numel()) +
                                " elements, expected 1");
  }
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
  if (!impl_) throw std::runtime_error("Tensor: use of undefined tensor");
  impl_->requires_grad = value;
  return *this;
}

Tensor Tensor::grad() const {
  if (!impl_ || !impl_->grad) return Tensor();
  return Tensor(impl_->grad);
}

void Tensor::set_grad(const Tensor& g) {
  if (!impl_) throw std::runtime_error("Tensor: use of undefined tensor");
  impl_->grad = g.impl_;
}

void Tensor::zero_grad() {
  if (impl_) impl_->grad.reset();
}

std::shared_ptr<GradFn> Tensor::grad_fn() const { return impl_ ? impl_->grad_fn : nullptr; }

void Tensor::set_grad_fn(std::shared_ptr<GradFn> fn) {
  if (!impl_) throw std::runtime_error("Tensor: use of undefined tensor");
  impl_->grad_fn = std::move(fn);
  if (impl_->grad_fn) impl_->requires_grad = true;
}

Tensor Tensor::detach() const {
  if (!impl_) return Tensor();
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  impl->requires_grad = false;
  return Tensor(std::move(impl));
}

Tensor Tensor::clone() const { return detach(); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (!g_grad_enabled) return false;
  for (const Tensor* t : inputs) {
    if (t && t->requires_grad()) return true;
  }
  return false;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!(a.shape() == b.shape())) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape().str() +
                                " vs " + b.shape().str());
  }
}

}  // namespace deblur
