#include "solido/layers.hpp"

#include <cmath>

namespace solido {

namespace {
std::vector<double> gaussian_init(std::size_t n, double std_dev, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = std_dev * rng.gaussian();
  return v;
}
}  // namespace

Conv1dLayer Conv1dLayer::make(const std::string& name, std::size_t cin, std::size_t cout,
                              std::size_t k, const ConvSpec& spec, Rng& rng, double w_std) {
  require(cin % spec.groups == 0, "Conv1dLayer: Cin not divisible by groups");
  std::size_t cing = cin / spec.groups;
  // He init: keeps activation variance steady through the ReLU stacks.
  if (w_std < 0.0) w_std = std::sqrt(2.0 / static_cast<double>(cing * k));
  Conv1dLayer l;
  l.name = name;
  l.spec = spec;
  l.w = Parameter(name + ".w", Tensor::from({cout, cing, k}, gaussian_init(cout * cing * k, w_std, rng)), true);
  l.b = Parameter(name + ".b", Tensor::zeros({cout}), true);
  return l;
}

Tensor Conv1dLayer::effective_weight() const {
  if (!adapter) return w.tensor;
  return add(w.tensor, reshape(adapter->delta(), w.tensor.shape()));
}

Tensor Conv1dLayer::forward(const Tensor& x) const {
  return conv1d(x, effective_weight(), b.tensor, spec);
}

void Conv1dLayer::collect(std::vector<Parameter*>& out) {
  out.push_back(&w);
  out.push_back(&b);
  if (adapter) {
    out.push_back(&adapter->A);
    out.push_back(&adapter->B);
  }
}

LinearLayer LinearLayer::make(const std::string& name, std::size_t n_in, std::size_t n_out, Rng& rng,
                              double w_std) {
  if (w_std < 0.0) w_std = std::sqrt(2.0 / static_cast<double>(n_in));
  LinearLayer l;
  l.name = name;
  l.w = Parameter(name + ".w", Tensor::from({n_out, n_in}, gaussian_init(n_out * n_in, w_std, rng)), true);
  l.b = Parameter(name + ".b", Tensor::zeros({n_out}), true);
  return l;
}

Tensor LinearLayer::effective_weight() const {
  if (!adapter) return w.tensor;
  return add(w.tensor, adapter->delta());
}

Tensor LinearLayer::forward(const Tensor& x) const {
  return linear(x, effective_weight(), b.tensor);
}

void LinearLayer::collect(std::vector<Parameter*>& out) {
  out.push_back(&w);
  out.push_back(&b);
  if (adapter) {
    out.push_back(&adapter->A);
    out.push_back(&adapter->B);
  }
}

std::size_t trainable_param_count(const std::vector<const Conv1dLayer*>& layers) {
  std::size_t n = 0;
  for (const auto* l : layers)
    if (l->adapter) n += l->adapter->trainable_params();
  return n;
}

}  // namespace solido
