#pragma once

#include <string>

#include "solido/bundle.hpp"
#include "solido/codec.hpp"
#include "solido/dataset.hpp"
#include "solido/optimizer.hpp"

namespace solido {

struct LossReport {
  double l_m = 0.0;
  double l_s = 0.0;
  double l_sq = 0.0;
  double l_wea = 0.0;
  double l_total = 0.0;
  std::size_t step = 0;
  double lambda_m = 0.0, lambda_s = 0.0, lambda_wea = 0.0;

  std::string to_json_line() const;
};

// One-way lambda switch driven by an EMA of L_WEA (decay 0.9). Once L_WEA
// drops below the threshold the weights move to (0.5, 0.5, 0.1) and stay there.
struct LambdaState {
  bool switched = false;
  double ema_wea = -1.0;  // unset
  static constexpr double kEmaDecay = 0.9;
};

void update_lambda_schedule(LambdaState& state, double l_wea, RunConfig& cfg);

// Differentiable counterparts of the training attacks; the forward pass
// reproduces solido::dsp::apply_attack sample for sample (same rng draws).
// Dither uses a straight-through gradient. x: [1,1,L].
Tensor attack_tensor(const Tensor& x, const dsp::AttackSpec& spec, double sample_rate, Rng& rng);

// || mel(s0) - mel(s_hat0) ||_1 over log1p-compressed mel spectrograms. 1-D inputs.
Tensor loss_mel(const Tensor& s0, const Tensor& s_hat0, const dsp::MelFilterbank& fb,
                std::size_t window_len, std::size_t hop);
// || log(xi(s0)) - log(xi(s_hat0)) ||_1 over magnitude spectrograms.
Tensor loss_stft(const Tensor& s0, const Tensor& s_hat0, std::size_t window_len, std::size_t hop);

inline double loss_sq(double l_m, double l_s, const RunConfig& cfg) {
  return cfg.lambda_m * l_m + cfg.lambda_s * l_s;
}

Tensor loss_wea(const Tensor& logits, const WatermarkBits& w);

// One SDFT step over a batch of dataset items: encode fresh payloads, run the
// full reverse chain with adapters, attack, decode, and take one AdamW step on
// {adapters, encoder, decoder}. Batch items evaluate sequentially; their
// gradients accumulate before the single optimizer update.
LossReport sdft_step(ModelBundle& bundle, const Dataset& data,
                     const std::vector<std::size_t>& batch_indices, Rng& rng, AdamW& opt,
                     LambdaState& lambda_state, std::size_t step);

struct FinetuneOptions {
  std::size_t max_steps = 3000;
  std::size_t eval_every = 50;       // 0: never
  double target_clean_acc = -1.0;    // early stop when reached (<0: never)
  std::size_t eval_payloads = 8;
  std::ostream* log = nullptr;       // JSON-lines sink
};

struct FinetuneResult {
  std::size_t steps_run = 0;
  double final_clean_acc = -1.0;
  LossReport last_report;
};

// The full SDFT loop: epoch-shuffled batches, lambda schedule, optional
// early stop on a seeded clean-accuracy probe.
FinetuneResult finetune(ModelBundle& bundle, const Dataset& data, const FinetuneOptions& opts,
                        Rng& rng);

}  // namespace solido
