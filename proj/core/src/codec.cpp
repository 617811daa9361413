#include "solido/codec.hpp"

#include <array>
#include <cmath>

namespace solido {

WatermarkBits WatermarkBits::random(std::size_t l, Rng& rng) {
  require(l >= 1, "WatermarkBits: payload must have at least one bit");
  return WatermarkBits{rng.bits(l)};
}

WatermarkBits WatermarkBits::from_hex(const std::string& hex, std::size_t l) {
  WatermarkBits w;
  w.bits.reserve(hex.size() * 4);
  for (char c : hex) {
    int v;
    if (c >= '0' && c <= '9')
      v = c - '0';
    else if (c >= 'a' && c <= 'f')
      v = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F')
      v = c - 'A' + 10;
    else
      throw Error(std::string("WatermarkBits::from_hex: bad hex digit '") + c + "'");
    for (int bit = 3; bit >= 0; --bit) w.bits.push_back(static_cast<std::uint8_t>((v >> bit) & 1));
  }
  require(w.bits.size() >= l || l == 0, "WatermarkBits::from_hex: hex shorter than payload");
  if (l > 0) w.bits.resize(l);  // odd payloads were zero-padded on encode
  return w;
}

std::string WatermarkBits::to_hex() const {
  static const char* digits = "0123456789abcdef";
  std::string out;
  std::size_t n = (bits.size() + 3) / 4;
  for (std::size_t i = 0; i < n; ++i) {
    int v = 0;
    for (std::size_t b = 0; b < 4; ++b) {
      std::size_t idx = i * 4 + b;
      v = (v << 1) | (idx < bits.size() ? bits[idx] : 0);
    }
    out += digits[v];
  }
  return out;
}

Tensor WatermarkBits::to_tensor() const {
  std::vector<double> d(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    require(bits[i] == 0 || bits[i] == 1, "WatermarkBits: values must be binary");
    d[i] = static_cast<double>(bits[i]);
  }
  return Tensor::from({1, bits.size()}, std::move(d));
}

EncoderNet::EncoderNet(std::size_t payload_bits, std::size_t latent_len, Rng& rng)
    : payload_bits_(payload_bits), latent_len_(latent_len) {
  require(payload_bits >= 1 && latent_len >= 1, "EncoderNet: bad geometry");
  // The latent has to survive the injected unit Gaussian and the attack
  // simulator; starting it at roughly twice the He scale gives the decoder a
  // detectable signal from step one instead of waiting for the encoder to
  // grow one.
  double lin_std = 3.0 / std::sqrt(static_cast<double>(payload_bits));
  lin = LinearLayer::make("enc.lin", payload_bits, latent_len, rng, lin_std);
  conv = Conv1dLayer::make("enc.conv", 1, 1, 3, {.padding = 1}, rng, 3.0 / std::sqrt(3.0));
}

Tensor EncoderNet::forward(const Tensor& wbits) const {
  require(wbits.shape().size() == 2 && wbits.shape()[1] == payload_bits_,
          "EncoderNet: payload width mismatch: got " + shape_str(wbits.shape()) + ", expected l=" +
              std::to_string(payload_bits_));
  std::size_t B = wbits.shape()[0];
  Tensor h = relu(lin.forward(wbits));                  // [B, L]
  Tensor x = reshape(h, {B, 1, latent_len_});           // single-channel view
  return conv.forward(x);                               // [B, 1, L]
}

Tensor EncoderNet::encode(const WatermarkBits& w) const { return forward(w.to_tensor()); }

std::vector<Parameter*> EncoderNet::parameters() {
  std::vector<Parameter*> out;
  lin.collect(out);
  conv.collect(out);
  return out;
}

Tensor inject(const Tensor& sigma, const Tensor& s_T) { return add(sigma, s_T); }

DecoderNet::DecoderNet(std::size_t payload_bits, Rng& rng, std::size_t ext_hidden)
    : payload_bits_(payload_bits) {
  require(payload_bits >= 1, "DecoderNet: payload must have at least one bit");
  const std::array<std::size_t, 8> plan = {1, 16, 16, 32, 32, 64, 64, kFixedFeatures};
  for (std::size_t i = 0; i + 1 < plan.size(); ++i) {
    std::size_t cin = plan[i], cout = plan[i + 1];
    std::string base = "dec.cb" + std::to_string(i);
    DscLayer l{
        .depthwise = Conv1dLayer::make(base + ".dw", cin, cin, 3,
                                       {.stride = 2, .padding = 1, .groups = cin}, rng),
        .pointwise = Conv1dLayer::make(base + ".pw", cin, cout, 1, {}, rng),
    };
    conv_block.push_back(std::move(l));
  }
  ext1 = LinearLayer::make("dec.ext1", kFixedFeatures, ext_hidden, rng);
  ext2 = LinearLayer::make("dec.ext2", ext_hidden, payload_bits, rng);
}

Tensor DecoderNet::forward(const Tensor& x) const {
  require(x.shape().size() == 3 && x.shape()[1] == 1, "DecoderNet: input must be [B,1,L]");
  Tensor h = x;
  for (const DscLayer& l : conv_block)
    h = relu(l.pointwise.forward(l.depthwise.forward(h)));
  Tensor h_fix = reduce_mean(h, {2});  // GAO over time: [B, l_fix]
  Tensor hidden = relu(ext1.forward(h_fix));
  return ext2.forward(hidden);  // [B, l] logits
}

Tensor DecoderNet::decode(const dsp::AudioClip& clip) const {
  require(clip.length() >= 1, "DecoderNet::decode: empty clip");
  Tensor x = Tensor::from({1, 1, clip.length()},
                          std::vector<double>(clip.samples.begin(), clip.samples.end()));
  return reshape(forward(x), {payload_bits_});
}

std::vector<Parameter*> DecoderNet::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : conv_block) {
    l.depthwise.collect(out);
    l.pointwise.collect(out);
  }
  ext1.collect(out);
  ext2.collect(out);
  return out;
}

WatermarkBits logits_to_bits(const Tensor& logits) {
  WatermarkBits w;
  w.bits.reserve(logits.numel());
  for (double v : logits.data()) w.bits.push_back(v > 0.0 ? 1 : 0);
  return w;
}

}  // namespace solido
