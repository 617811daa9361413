#pragma once

#include <optional>
#include <string>
#include <vector>

#include "solido/lora.hpp"
#include "solido/ops.hpp"
#include "solido/rng.hpp"
#include "solido/tensor.hpp"

namespace solido {

struct Conv1dLayer {
  Parameter w;  // [Cout, Cin/groups, k]
  Parameter b;  // [Cout]
  ConvSpec spec;
  std::string name;
  std::optional<LoraAdapter> adapter;

  static Conv1dLayer make(const std::string& name, std::size_t cin, std::size_t cout, std::size_t k,
                          const ConvSpec& spec, Rng& rng, double w_std = -1.0 /* -1: 1/sqrt(fan_in) */);

  Tensor forward(const Tensor& x) const;
  Tensor effective_weight() const;  // base + adapter delta, as used by forward
  std::size_t d_in() const { return w.tensor.shape()[1] * w.tensor.shape()[2]; }
  std::size_t d_out() const { return w.tensor.shape()[0]; }

  void collect(std::vector<Parameter*>& out);
};

struct LinearLayer {
  Parameter w;  // [m, n]
  Parameter b;  // [m]
  std::string name;
  std::optional<LoraAdapter> adapter;

  static LinearLayer make(const std::string& name, std::size_t n_in, std::size_t n_out, Rng& rng,
                          double w_std = -1.0);

  Tensor forward(const Tensor& x) const;  // x: [B, n]
  Tensor effective_weight() const;
  std::size_t d_in() const { return w.tensor.shape()[1]; }
  std::size_t d_out() const { return w.tensor.shape()[0]; }

  void collect(std::vector<Parameter*>& out);
};

// r * (d_in + d_out) summed over attached adapters.
std::size_t trainable_param_count(const std::vector<const Conv1dLayer*>& layers);

}  // namespace solido
