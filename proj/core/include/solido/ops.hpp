#pragma once

#include <vector>

#include "solido/dsp.hpp"
#include "solido/tensor.hpp"

namespace solido {

enum class EwOp { kAdd, kSub, kMul, kScale };

struct ConvSpec {
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t dilation = 1;
  std::size_t groups = 1;
};

inline std::size_t conv_out_len(std::size_t in_len, std::size_t k, const ConvSpec& s) {
  std::size_t eff = s.dilation * (k - 1) + 1;
  require(in_len + 2 * s.padding >= eff, "conv1d: kernel does not fit the padded input");
  return (in_len + 2 * s.padding - eff) / s.stride + 1;
}

// ---- elementwise / arithmetic ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor elementwise(EwOp op, const Tensor& a, const Tensor& b);
Tensor elementwise(EwOp op, const Tensor& a, double b);

// ---- linear algebra ----
// y = x W^T + bias, x: [B,n], W: [m,n], bias: [m] (pass undefined Tensor for none)
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);
// plain 2-D product, a: [m,k], b: [k,n]
Tensor matmul(const Tensor& a, const Tensor& b);

// x: [B,Cin,L], w: [Cout, Cin/groups, k], bias: [Cout] or undefined.
// Cross-correlation convention.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, const ConvSpec& spec);

// ---- activations ----
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor log_op(const Tensor& x);  // errors on non-positive input
Tensor activation(const std::string& name, const Tensor& x);

// ---- reductions / losses ----
Tensor reduce_mean(const Tensor& x, const std::vector<std::size_t>& axes);
Tensor mean_all(const Tensor& x);
Tensor sum_all(const Tensor& x);
Tensor l1_distance(const Tensor& a, const Tensor& b);  // subgradient 0 at ties
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets);

// ---- structural ----
Tensor reshape(const Tensor& x, Shape shape);
Tensor slice_last(const Tensor& x, std::size_t start, std::size_t len);       // last axis
Tensor slice_channels(const Tensor& x, std::size_t c0, std::size_t c1);      // axis 1 of [B,C,L]
Tensor channel_bias_add(const Tensor& x, const Tensor& b);                   // b: [C]
Tensor concat_batch(const std::vector<Tensor>& xs);                          // along axis 0

// ---- attack-simulator ops on tensors (forward matches solido::dsp) ----
// y[n] = x[n] + attenuation * x[n-d] along the last axis.
Tensor delay_add(const Tensor& x, std::size_t delay, double attenuation);
// Round to the lsb grid after adding the given dither noise; straight-through
// gradient (quantization is flat almost everywhere).
Tensor dither_quantize(const Tensor& x, const std::vector<double>& noise, double lsb);

// ---- differentiable spectrogram ops (kernels shared with solido::dsp) ----
// x: [L]; result: [frames, bins]. Smooth everywhere (power, not magnitude).
Tensor stft_power(const Tensor& x, std::size_t window_len, std::size_t hop);
// log(sqrt(power) + floor); the L_S building block.
Tensor stft_log_magnitude(const Tensor& x, std::size_t window_len, std::size_t hop,
                          double floor = 1e-7);
// log1p(fb . power) per frame; the L_M building block. power: [frames, bins].
Tensor mel_compress(const Tensor& power, const dsp::MelFilterbank& fb);

}  // namespace solido
