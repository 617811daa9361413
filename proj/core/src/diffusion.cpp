#include "solido/diffusion.hpp"

#include <cmath>

namespace solido {

NoiseSchedule NoiseSchedule::linear(std::size_t T, double beta_start, double beta_end) {
  require(T >= 2, "NoiseSchedule: T must be >= 2");
  require(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
          "NoiseSchedule: need 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.T = T;
  s.beta.assign(T + 1, 0.0);
  s.alpha.assign(T + 1, 0.0);
  s.alpha_bar.assign(T + 1, 0.0);
  s.delta.assign(T + 1, 0.0);
  double prod = 1.0;
  for (std::size_t t = 1; t <= T; ++t) {
    s.beta[t] = beta_start + (beta_end - beta_start) * static_cast<double>(t - 1) / static_cast<double>(T - 1);
    s.alpha[t] = 1.0 - s.beta[t];
    prod *= s.alpha[t];
    s.alpha_bar[t] = prod;
  }
  // Posterior std; delta[1] = 0 matches z <- 0 at the last reverse step.
  for (std::size_t t = 2; t <= T; ++t)
    s.delta[t] = std::sqrt((1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]) * s.beta[t]);
  return s;
}

Tensor q_sample(const Tensor& s0, std::size_t t, const Tensor& eps, const NoiseSchedule& sched) {
  require(t >= 1 && t <= sched.T, "q_sample: t out of range");
  require(s0.shape() == eps.shape(), "q_sample: eps shape must match s0");
  double a = std::sqrt(sched.alpha_bar[t]);
  double b = std::sqrt(1.0 - sched.alpha_bar[t]);
  return add(scale(s0, a), scale(eps, b));
}

DenoiserNetwork::DenoiserNetwork(const DenoiserConfig& cfg, Rng& rng) : cfg_(cfg) {
  std::size_t C = cfg.channels;
  input = Conv1dLayer::make("vocoder.input", 1, C, 3, {.padding = 1}, rng);
  emb1 = LinearLayer::make("vocoder.emb1", cfg.step_embed_dim, cfg.step_embed_dim, rng);
  emb2 = LinearLayer::make("vocoder.emb2", cfg.step_embed_dim, C, rng);
  for (std::size_t i = 0; i < cfg.dilations.size(); ++i) {
    std::size_t d = cfg.dilations[i];
    std::string base = "vocoder.blocks." + std::to_string(i);
    Block blk{
        .gate = Conv1dLayer::make(base + ".gate", C, 2 * C, 3, {.padding = d, .dilation = d}, rng),
        .cond = Conv1dLayer::make(base + ".cond", cfg.n_mels, 2 * C, 1, {}, rng),
        .out = Conv1dLayer::make(base + ".out", C, 2 * C, 1, {}, rng),
    };
    blocks.push_back(std::move(blk));
  }
  out1 = Conv1dLayer::make("vocoder.out1", C, C, 1, {}, rng);
  out2 = Conv1dLayer::make("vocoder.out2", C, 1, 3, {.padding = 1}, rng, 0.0);  // zero init
}

Tensor DenoiserNetwork::step_embedding(std::size_t t) const {
  std::size_t E = cfg_.step_embed_dim;
  std::vector<double> e(E);
  for (std::size_t i = 0; i < E / 2; ++i) {
    double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(E));
    e[2 * i] = std::sin(static_cast<double>(t) * freq);
    e[2 * i + 1] = std::cos(static_cast<double>(t) * freq);
  }
  Tensor emb = Tensor::from({1, E}, std::move(e));
  Tensor h = relu(emb1.forward(emb));
  return reshape(emb2.forward(h), {cfg_.channels});  // [C]
}

Tensor DenoiserNetwork::upsample_mel(const dsp::Spectrogram& mel, std::size_t length) const {
  require(mel.bins == cfg_.n_mels, "upsample_mel: mel bins do not match the conditioner width");
  require(mel.frame_hop > 0, "upsample_mel: hop unset");
  std::vector<double> out(cfg_.n_mels * length);
  for (std::size_t i = 0; i < length; ++i) {
    std::size_t f = std::min(i / mel.frame_hop, mel.frames - 1);
    for (std::size_t m = 0; m < cfg_.n_mels; ++m) out[m * length + i] = mel.at(f, m);
  }
  return Tensor::from({1, cfg_.n_mels, length}, std::move(out));
}

Tensor DenoiserNetwork::forward(const Tensor& x, std::size_t t, const Tensor& mel_cond) const {
  require(x.shape().size() == 3 && x.shape()[1] == 1, "denoiser: input must be [B,1,L]");
  std::size_t L = x.shape()[2];
  require(mel_cond.shape().size() == 3 && mel_cond.shape()[1] == cfg_.n_mels && mel_cond.shape()[2] == L,
          "denoiser: conditioning length mismatch: x " + shape_str(x.shape()) + " vs mel " +
              shape_str(mel_cond.shape()));

  Tensor mel = mel_cond;
  if (mel.shape()[0] == 1 && x.shape()[0] > 1) {
    // Share one conditioner across the batch.
    std::vector<Tensor> reps(x.shape()[0], mel);
    mel = concat_batch(reps);
  }

  std::size_t C = cfg_.channels;
  Tensor emb = step_embedding(t);
  Tensor h = relu(input.forward(x));
  Tensor skip_sum;
  for (const Block& blk : blocks) {
    Tensor hb = channel_bias_add(h, emb);
    Tensor gpre = add(blk.gate.forward(hb), blk.cond.forward(mel));
    Tensor gated = mul(tanh_op(slice_channels(gpre, 0, C)), sigmoid(slice_channels(gpre, C, 2 * C)));
    Tensor o = blk.out.forward(gated);
    Tensor res = slice_channels(o, 0, C);
    Tensor skip = slice_channels(o, C, 2 * C);
    h = scale(add(h, res), 1.0 / std::sqrt(2.0));
    skip_sum = skip_sum.defined() ? add(skip_sum, skip) : skip;
  }
  Tensor y = relu(scale(skip_sum, 1.0 / std::sqrt(static_cast<double>(blocks.size()))));
  y = relu(out1.forward(y));
  return out2.forward(y);
}

std::vector<Parameter*> DenoiserNetwork::parameters() {
  std::vector<Parameter*> out;
  input.collect(out);
  emb1.collect(out);
  emb2.collect(out);
  for (auto& blk : blocks) {
    blk.gate.collect(out);
    blk.cond.collect(out);
    blk.out.collect(out);
  }
  out1.collect(out);
  out2.collect(out);
  return out;
}

void DenoiserNetwork::set_trainable(bool v) {
  for (Parameter* p : parameters())
    if (p->name.rfind("lora.", 0) != 0) p->set_trainable(v);
}

std::vector<Conv1dLayer*> DenoiserNetwork::final_five_convs() {
  Block& last = blocks.back();
  return {&last.gate, &last.cond, &last.out, &out1, &out2};
}

std::vector<const Conv1dLayer*> DenoiserNetwork::final_five_convs() const {
  const Block& last = blocks.back();
  return {&last.gate, &last.cond, &last.out, &out1, &out2};
}

Tensor reverse_step(const Tensor& x_t, std::size_t t, const Tensor& mel_cond,
                    const NoiseSchedule& sched, const Tensor& z, const DenoiserNetwork& net) {
  require(t >= 1 && t <= sched.T, "reverse_step: t out of range");
  Tensor eps = net.forward(x_t, t, mel_cond);
  double coef = (1.0 - sched.alpha[t]) / std::sqrt(1.0 - sched.alpha_bar[t]);
  Tensor x = scale(sub(x_t, scale(eps, coef)), 1.0 / std::sqrt(sched.alpha[t]));
  if (t > 1 && z.defined()) x = add(x, scale(z, sched.delta[t]));
  return x;
}

Tensor sample(const Tensor& x_T, const Tensor& mel_cond, const NoiseSchedule& sched,
              const DenoiserNetwork& net, Rng& rng) {
  Tensor x = x_T;
  for (std::size_t t = sched.T; t >= 1; --t) {
    Tensor z;
    if (t > 1) {
      std::vector<double> zd(x.numel());
      for (double& v : zd) v = rng.gaussian();
      z = Tensor::from(x.shape(), std::move(zd));
    }
    x = reverse_step(x, t, mel_cond, sched, z, net);
  }
  return x;
}

double pretrain_step(const Tensor& s0_batch, const Tensor& mel_cond, const NoiseSchedule& sched,
                     DenoiserNetwork& net, Rng& rng, AdamW& opt) {
  std::size_t t = 1 + rng.uniform_int(sched.T);
  std::vector<double> ed(s0_batch.numel());
  for (double& v : ed) v = rng.gaussian();
  Tensor eps = Tensor::from(s0_batch.shape(), std::move(ed));
  Tensor x_t = q_sample(s0_batch, t, eps, sched);
  Tensor pred = net.forward(x_t, t, mel_cond);
  Tensor diff = sub(pred, eps);
  Tensor loss = mean_all(mul(diff, diff));
  double value = loss.item();
  if (!std::isfinite(value)) throw NumericError("pretrain_step: loss is not finite");

  std::vector<Parameter*> params = net.parameters();
  AdamW::zero_grads(params);
  loss.backward();
  std::vector<Parameter*> with_grad;
  for (Parameter* p : params)
    if (p->trainable && p->tensor.has_grad()) with_grad.push_back(p);
  opt.step(with_grad);
  AdamW::zero_grads(params);
  return value;
}

}  // namespace solido
