#pragma once

#include <vector>

#include "solido/dsp.hpp"
#include "solido/layers.hpp"
#include "solido/rng.hpp"

namespace solido {

struct WatermarkBits {
  std::vector<std::uint8_t> bits;  // strictly 0/1

  std::size_t size() const { return bits.size(); }
  static WatermarkBits random(std::size_t l, Rng& rng);
  static WatermarkBits from_hex(const std::string& hex, std::size_t l);
  std::string to_hex() const;
  Tensor to_tensor() const;  // [1, l]
};

// linear l -> L, ReLU, conv1d 1 -> 1 (k3, s1, p1). Maps the payload to a
// latent matched to the diffusion input shape.
class EncoderNet {
 public:
  EncoderNet() = default;
  EncoderNet(std::size_t payload_bits, std::size_t latent_len, Rng& rng);

  Tensor encode(const WatermarkBits& w) const;   // [1,1,L]
  Tensor forward(const Tensor& wbits) const;     // [B,l] -> [B,1,L]

  std::size_t payload_bits() const { return payload_bits_; }
  std::size_t latent_len() const { return latent_len_; }
  std::vector<Parameter*> parameters();

  LinearLayer lin;
  Conv1dLayer conv;

 private:
  std::size_t payload_bits_ = 0;
  std::size_t latent_len_ = 0;
};

// sigma + s_T
Tensor inject(const Tensor& sigma, const Tensor& s_T);

// Seven depthwise-separable conv layers (k3, s2, p1), global average over
// time, then linear 64 -> 128, ReLU, linear 128 -> l. Emits l logits for any
// input length >= 1.
class DecoderNet {
 public:
  static constexpr std::size_t kFixedFeatures = 64;  // l_fix

  DecoderNet() = default;
  DecoderNet(std::size_t payload_bits, Rng& rng, std::size_t ext_hidden = 128);

  Tensor forward(const Tensor& x) const;            // [B,1,L] -> [B,l]
  Tensor decode(const dsp::AudioClip& clip) const;  // -> [l] logits

  std::size_t payload_bits() const { return payload_bits_; }
  std::vector<Parameter*> parameters();

  struct DscLayer {
    Conv1dLayer depthwise;  // groups = Cin, k3 s2 p1
    Conv1dLayer pointwise;  // 1x1, Cin -> Cout
  };
  std::vector<DscLayer> conv_block;
  LinearLayer ext1, ext2;

 private:
  std::size_t payload_bits_ = 0;
};

// bit = 1 iff logit > 0; ties resolve to 0.
WatermarkBits logits_to_bits(const Tensor& logits);

}  // namespace solido
