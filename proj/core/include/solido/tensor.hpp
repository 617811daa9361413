#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "solido/common.hpp"

namespace solido {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // allocated lazily, only when requires_grad
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // pulls this->grad into parents

  std::size_t numel() const { return data.size(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

// Dense row-major tensor of 64-bit floats participating in reverse-mode
// differentiation. The handle is cheap to copy; copies share the node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->data.size(); }

  std::span<const double> data() const { return node_->data; }
  std::span<double> mut_data() { return node_->data; }
  double item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  std::span<const double> grad() const;
  std::span<double> mut_grad();
  void zero_grad();

  // Reverse pass from a scalar. Every trainable leaf reachable through the
  // recorded graph accumulates gradient; leaves with requires_grad=false are
  // never touched.
  void backward() const;

  // Same values, cut out of the graph.
  Tensor detach() const;

  bool all_finite() const;

  std::shared_ptr<detail::Node>& node() { return node_; }
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Named, optionally trainable tensor. Frozen parameters never accumulate
// gradient.
struct Parameter {
  Tensor tensor;
  std::string name;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor t, bool train = true) : tensor(std::move(t)), name(std::move(n)), trainable(train) {
    tensor.set_requires_grad(trainable);
  }
  void set_trainable(bool v) {
    trainable = v;
    tensor.set_requires_grad(v);
  }
};

// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
// for a scalar-valued function. `f` must not mutate its argument.
double finite_difference_check(const std::function<Tensor(Tensor&)>& f, Tensor& x, double h = 1e-5,
                               std::size_t max_coords = 0);

}  // namespace solido
