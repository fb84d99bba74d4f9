#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "deblur/core/ops.hpp"
#include "deblur/core/tensor.hpp"

namespace deblur {

namespace {

// Post-order DFS over the recorded DAG (iterative; graphs from long
// training chains overflow the stack otherwise). Inputs land before their
// consumers, so the reversed order visits each node only after every
// consumer has contributed its gradient.
std::vector<Tensor> topo_order(const Tensor& root) {
  std::vector<Tensor> order;
  std::unordered_set<TensorImpl*> seen;
  struct Frame {
    Tensor node;
    std::size_t next_input = 0;
  };
  std::vector<Frame> stack;
  if (root.defined() && !seen.count(root.unsafe_impl())) {
    seen.insert(root.unsafe_impl());
    stack.push_back({root});
  }
  while (!stack.empty()) {
    Frame& top = stack.back();
    auto fn = top.node.grad_fn();
    if (fn && top.next_input < fn->inputs.size()) {
      const Tensor& in = fn->inputs[top.next_input++];
      if (in.defined() && !seen.count(in.unsafe_impl())) {
        seen.insert(in.unsafe_impl());
        stack.push_back({in});
      }
      continue;
    }
    order.push_back(top.node);
    stack.pop_back();
  }
  return order;
}

std::unordered_map<TensorImpl*, Tensor> compute_grads(const Tensor& root, bool create_graph) {
  std::vector<Tensor> order = topo_order(root);
  std::unordered_map<TensorImpl*, Tensor> grads;
  grads[root.unsafe_impl()] = Tensor::full(root.shape(), 1.0f);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto fn = it->grad_fn();
    if (!fn) continue;
    auto found = grads.find(it->unsafe_impl());
    if (found == grads.end()) continue;
    Tensor grad_out = found->second;

    std::vector<Tensor> input_grads;
    {
      std::optional<NoGradGuard> guard;
      if (!create_graph) guard.emplace();
      input_grads = fn->backward(grad_out);
    }
    if (input_grads.size() != fn->inputs.size()) {
      throw std::runtime_error("backward(" + fn->name + "): produced " +
                               std::to_string(input_grads.size()) + " gradients for " +
                               std::to_string(fn->inputs.size()) + " inputs");
    }
    for (std::size_t i = 0; i < fn->inputs.size(); ++i) {
      if (!input_grads[i].defined()) continue;
      const Tensor& in = fn->inputs[i];
      if (!in.requires_grad()) continue;
      auto slot = grads.find(in.unsafe_impl());
      if (slot == grads.end()) {
        grads.emplace(in.unsafe_impl(), input_grads[i]);
      } else {
        std::optional<NoGradGuard> guard;
        if (!create_graph) guard.emplace();
        slot->second = add(slot->second, input_grads[i]);
      }
    }
  }
  return grads;
}

}  // namespace

void backward(const Tensor& loss, bool create_second_order) {
  if (loss.numel() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                loss.shape().str());
  }
  std::vector<Tensor> order = topo_order(loss);
  auto grads = compute_grads(loss, create_second_order);
  for (Tensor& t : order) {
    if (!t.requires_grad() || t.grad_fn()) continue;  // leaves only
    auto it = grads.find(t.unsafe_impl());
    if (it == grads.end()) continue;
    if (t.grad().defined()) {
      std::optional<NoGradGuard> guard;
      if (!create_second_order) guard.emplace();
      t.set_grad(add(t.grad(), it->second));
    } else {
      t.set_grad(it->second);
    }
  }
}

std::vector<Tensor> grad(const Tensor& output, const std::vector<Tensor>& wrt,
                         bool create_graph) {
  if (output.numel() != 1) {
    throw std::invalid_argument("grad: output must be scalar, got shape " +
                                output.shape().str());
  }
  auto grads = compute_grads(output, create_graph);
  std::vector<Tensor> result;
  result.reserve(wrt.size());
  for (const Tensor& t : wrt) {
    auto it = grads.find(t.unsafe_impl());
    if (it == grads.end()) {
      throw std::runtime_error("grad: an input is not reachable from the output");
    }
    result.push_back(it->second);
  }
  return result;
}

}  // namespace deblur
