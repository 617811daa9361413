#include "solido/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace solido {

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return from(std::move(shape), {}, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::size_t n = shape_numel(shape);
  Tensor t;
  t.node_ = std::make_shared<detail::Node>();
  t.node_->shape = std::move(shape);
  t.node_->data.assign(n, value);
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  std::size_t n = shape_numel(shape);
  if (data.empty()) data.assign(n, 0.0);
  require(data.size() == n, "Tensor::from: data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  Tensor t;
  t.node_ = std::make_shared<detail::Node>();
  t.node_->shape = std::move(shape);
  t.node_->data = std::move(data);
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

double Tensor::item() const {
  require(numel() == 1, "Tensor::item: tensor has " + std::to_string(numel()) + " elements");
  return node_->data[0];
}

std::span<const double> Tensor::grad() const {
  require(node_ && !node_->grad.empty(), "Tensor::grad: no gradient present");
  return node_->grad;
}

std::span<double> Tensor::mut_grad() {
  require(node_ != nullptr, "Tensor::mut_grad: undefined tensor");
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_ && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::backward() const {
  require(node_ != nullptr, "backward: undefined tensor");
  require(numel() == 1, "backward: loss must be scalar, got shape " + shape_str(shape()));

  // Topological order by depth-first walk over parents.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      detail::Node* p = n->parents[idx].get();
      ++idx;
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

Tensor Tensor::detach() const {
  return Tensor::from(shape(), std::vector<double>(node_->data.begin(), node_->data.end()), false);
}

bool Tensor::all_finite() const {
  for (double v : node_->data)
    if (!std::isfinite(v)) return false;
  return true;
}

double finite_difference_check(const std::function<Tensor(Tensor&)>& f, Tensor& x, double h,
                               std::size_t max_coords) {
  x.set_requires_grad(true);
  x.zero_grad();
  Tensor y = f(x);
  require(y.numel() == 1, "finite_difference_check: f must be scalar-valued");
  y.backward();
  std::vector<double> analytic(x.numel(), 0.0);
  if (x.has_grad()) {
    auto g = x.grad();
    analytic.assign(g.begin(), g.end());
  }

  std::size_t n = x.numel();
  std::size_t step = 1;
  if (max_coords > 0 && n > max_coords) step = n / max_coords;

  double worst = 0.0;
  auto xd = x.mut_data();
  for (std::size_t i = 0; i < n; i += step) {
    double keep = xd[i];
    xd[i] = keep + h;
    double fp = f(x).item();
    xd[i] = keep - h;
    double fm = f(x).item();
    xd[i] = keep;
    double numeric = (fp - fm) / (2.0 * h);
    double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace solido
