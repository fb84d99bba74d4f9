#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace deblur {

// All tensors are dense N x C x H x W float32, row-major. Vectors and
// scalars are carried as degenerate 4-d shapes (e.g. 1x1x1x1).
struct Shape {
  std::int64_t n = 0, c = 0, h = 0, w = 0;

  std::int64_t numel() const { return n * c * h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

class Tensor;

// One recorded operation. `inputs` are the graph edges; `backward` maps the
// output gradient to one gradient per input (an undefined Tensor means the
// op does not differentiate through that slot). Backward implementations
// are written in terms of other recorded ops, so when grads are computed
// with create_graph the results stay differentiable (one extra level is all
// the training loop needs, for the gradient penalty).
struct GradFn {
  std::string name;
  std::vector<Tensor> inputs;

  explicit GradFn(std::string op_name) : name(std::move(op_name)) {}
  virtual ~GradFn() = default;
  virtual std::vector<Tensor> backward(const Tensor& grad_out) = 0;
};

struct TensorImpl {
  Shape shape;
  std::vector<float> data;
  bool requires_grad = false;
  std::shared_ptr<TensorImpl> grad;  // lazily allocated by backward()
  std::shared_ptr<GradFn> grad_fn;   // null for leaves
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<float> values, bool requires_grad = false);
  static Tensor scalar(float value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::int64_t numel() const { return shape().numel(); }

  std::span<float> data();
  std::span<const float> data() const;
  float item() const;  // value of a 1-element tensor

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value);

  Tensor grad() const;
  void set_grad(const Tensor& g);
  void zero_grad();  // drops the grad buffer (also breaks grad->graph links)

  std::shared_ptr<GradFn> grad_fn() const;
  void set_grad_fn(std::shared_ptr<GradFn> fn);

  // Same storage, detached from the graph and not requiring grad.
  Tensor detach() const;
  // Deep copy of the values, no graph.
  Tensor clone() const;

  TensorImpl* unsafe_impl() const { return impl_.get(); }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

// Scoped switch that stops ops from recording graph nodes.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// True when ops should record a node for these inputs.
bool should_record(std::initializer_list<const Tensor*> inputs);

// Accumulates gradients into every reachable leaf that requires grad.
// `loss` must be a single-element tensor. With create_second_order the
// computed gradients are themselves recorded so a later backward can
// differentiate through them.
void backward(const Tensor& loss, bool create_second_order = false);

// Computes gradients of `output` w.r.t. `wrt` only, without touching any
// .grad field. Used where a gradient is itself an intermediate value
// (gradient penalty). Throws if some requested input is unreachable.
std::vector<Tensor> grad(const Tensor& output, const std::vector<Tensor>& wrt,
                         bool create_graph = false);

void check_same_shape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace deblur
