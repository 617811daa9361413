#pragma once

#include <vector>

#include "solido/dsp.hpp"
#include "solido/layers.hpp"
#include "solido/optimizer.hpp"
#include "solido/rng.hpp"

namespace solido {

// beta/alpha/alpha_bar/delta tables, 1-indexed (index 0 unused).
struct NoiseSchedule {
  std::size_t T = 0;
  std::vector<double> beta, alpha, alpha_bar, delta;

  static NoiseSchedule linear(std::size_t T, double beta_start, double beta_end);
};

struct DenoiserConfig {
  std::size_t channels = 32;
  std::vector<std::size_t> dilations = {1, 2, 4, 8};  // one residual block each
  std::size_t step_embed_dim = 64;
  std::size_t n_mels = 24;
};

// sqrt(alpha_bar_t) s0 + sqrt(1 - alpha_bar_t) eps
Tensor q_sample(const Tensor& s0, std::size_t t, const Tensor& eps, const NoiseSchedule& sched);

// Mel-conditioned dilated-convolution noise predictor. Forward preserves the
// length of its [B,1,L] input.
class DenoiserNetwork {
 public:
  DenoiserNetwork(const DenoiserConfig& cfg, Rng& rng);

  // mel_cond: [B, n_mels, L] (see upsample_mel).
  Tensor forward(const Tensor& x, std::size_t t, const Tensor& mel_cond) const;

  // Nearest-frame repetition of a mel spectrogram to sample resolution.
  Tensor upsample_mel(const dsp::Spectrogram& mel, std::size_t length) const;

  const DenoiserConfig& config() const { return cfg_; }
  std::vector<Parameter*> parameters();
  void set_trainable(bool v);

  // The adapter attachment targets: the last residual block's three convs plus
  // the two output convs.
  std::vector<Conv1dLayer*> final_five_convs();
  std::vector<const Conv1dLayer*> final_five_convs() const;

  struct Block {
    Conv1dLayer gate;  // C -> 2C, k3, dilated
    Conv1dLayer cond;  // n_mels -> 2C, 1x1
    Conv1dLayer out;   // C -> 2C, 1x1 (residual half + skip half)
  };

  Conv1dLayer input;
  LinearLayer emb1, emb2;
  std::vector<Block> blocks;
  Conv1dLayer out1;  // C -> C, 1x1
  Conv1dLayer out2;  // C -> 1, k3 (zero-initialized)

 private:
  Tensor step_embedding(std::size_t t) const;
  DenoiserConfig cfg_;
};

// One reverse-chain update; z must be zero at t=1.
Tensor reverse_step(const Tensor& x_t, std::size_t t, const Tensor& mel_cond,
                    const NoiseSchedule& sched, const Tensor& z, const DenoiserNetwork& net);

// Full reverse chain from x_T, fresh z per step (zero at t=1). Differentiable
// end to end.
Tensor sample(const Tensor& x_T, const Tensor& mel_cond, const NoiseSchedule& sched,
              const DenoiserNetwork& net, Rng& rng);

// One base-training step on ||eps - eps_theta(s_t, t, c)||^2 (mean over batch).
double pretrain_step(const Tensor& s0_batch, const Tensor& mel_cond, const NoiseSchedule& sched,
                     DenoiserNetwork& net, Rng& rng, AdamW& opt);

}  // namespace solido
