#pragma once

#include "solido/ops.hpp"
#include "solido/rng.hpp"
#include "solido/tensor.hpp"

namespace solido {

// Low-rank factor pair beside a frozen base weight: W = W_G + scale * B A.
// A is Gaussian-initialized, B starts at zero, so a fresh adapter leaves the
// base output untouched.
struct LoraAdapter {
  Parameter A;  // [r, d_in]
  Parameter B;  // [d_out, r]
  std::size_t rank = 0;
  double alpha = 0.0;
  bool bare_alpha = false;  // paper's Eq. uses bare alpha; default is alpha/r

  double scaling() const { return bare_alpha ? alpha : alpha / static_cast<double>(rank); }

  // scale * B A as a [d_out, d_in] tensor expression (differentiable wrt A, B).
  Tensor delta() const { return scale(matmul(B.tensor, A.tensor), scaling()); }

  std::size_t trainable_params() const { return A.tensor.numel() + B.tensor.numel(); }

  static LoraAdapter make(const std::string& layer_name, std::size_t d_out, std::size_t d_in,
                          std::size_t rank, double alpha, Rng& rng, bool bare_alpha = false,
                          double init_std = 0.01);
};

struct Conv1dLayer;
struct LinearLayer;

// Freezes the base weight and attaches a fresh adapter. Errors if the layer
// already carries one.
void attach_adapter(Conv1dLayer& layer, std::size_t rank, double alpha, Rng& rng,
                    bool bare_alpha = false);
void attach_adapter(LinearLayer& layer, std::size_t rank, double alpha, Rng& rng,
                    bool bare_alpha = false);

// Folds scale*BA into the base weight and drops the adapter.
void merge_adapter(Conv1dLayer& layer);
void merge_adapter(LinearLayer& layer);

}  // namespace solido
