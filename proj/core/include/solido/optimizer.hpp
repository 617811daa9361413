#pragma once

#include <cmath>
#include <unordered_map>
#include <vector>

#include "solido/tensor.hpp"

namespace solido {

// Decoupled-weight-decay adaptive-moment optimizer. Moment buffers exist only
// for trainable parameters; frozen parameters are rejected.
class AdamW {
 public:
  explicit AdamW(double lr = 2e-4, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
                 double weight_decay = 0.01)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

  void step(const std::vector<Parameter*>& params) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (Parameter* p : params) {
      require(p->trainable, "AdamW::step: frozen parameter '" + p->name + "' passed to optimizer");
      require(p->tensor.has_grad(), "AdamW::step: parameter '" + p->name + "' has no gradient");
      auto& st = state_[p->tensor.node().get()];
      std::size_t n = p->tensor.numel();
      if (st.m.size() != n) {
        st.m.assign(n, 0.0);
        st.v.assign(n, 0.0);
      }
      auto w = p->tensor.mut_data();
      auto g = p->tensor.grad();
      for (std::size_t i = 0; i < n; ++i) {
        st.m[i] = beta1_ * st.m[i] + (1.0 - beta1_) * g[i];
        st.v[i] = beta2_ * st.v[i] + (1.0 - beta2_) * g[i] * g[i];
        double mhat = st.m[i] / bc1;
        double vhat = st.v[i] / bc2;
        w[i] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * w[i]);
      }
    }
  }

  static void zero_grads(const std::vector<Parameter*>& params) {
    for (Parameter* p : params) p->tensor.zero_grad();
  }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  double lr_, beta1_, beta2_, eps_, weight_decay_;
  std::uint64_t t_ = 0;
  std::unordered_map<detail::Node*, Moments> state_;
};

}  // namespace solido
