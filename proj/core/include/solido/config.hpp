#pragma once

#include <string>
#include <vector>

#include "solido/common.hpp"

namespace solido {

// Single JSON document controlling every stage. Unknown keys are rejected.
struct RunConfig {
  // audio / dataset
  double sample_rate = 8000.0;
  double clip_seconds = 0.5;
  std::size_t dataset_clips = 64;

  // spectrogram
  std::size_t window_len = 256;
  std::size_t hop = 128;
  std::size_t n_mels = 24;
  double mel_fmin = 40.0;
  double mel_fmax = 0.0;  // 0 -> sample_rate / 2

  // diffusion
  std::size_t diffusion_steps = 6;  // T
  double beta_start = 1e-4;
  double beta_end = 0.35;
  // Sized so a full SDFT run fits the desk-run wall-clock budget; wider
  // vocoders sound better but cost quadratically in channels per step.
  std::size_t channels = 8;
  std::vector<std::size_t> dilations = {1, 2};
  std::size_t step_embed_dim = 64;

  // watermark codec
  std::size_t payload_bits = 16;
  std::size_t ext_hidden = 128;

  // LoRA
  std::size_t lora_rank = 4;
  double lora_alpha = 16.0;
  bool lora_bare_alpha = false;  // true: paper's bare-alpha scaling

  // SDFT
  double lambda_m = 0.0;
  double lambda_s = 0.0;
  double lambda_wea = 1.0;
  double wea_threshold = 0.1;
  double lr = 2e-4;
  std::size_t batch = 4;
  std::size_t epochs = 25;
  std::size_t max_steps = 3000;
  bool train_attacks = true;
  // Clean steps before the attack simulator switches on. The joint
  // encoder/decoder code has to be discovered from scratch, and early attacked
  // items mostly add gradient noise; a clean warm-up shortens the bootstrap.
  std::size_t attack_warmup_steps = 1000;
  // After the warm-up, this fraction of items still trains clean. Clean items
  // carry the sharpest extraction gradient; the attacked share only needs to
  // be large enough to keep the code robust.
  double clean_mix = 0.5;
  bool crop_symmetric = false;

  std::uint64_t seed = 42;

  std::size_t clip_samples() const { return static_cast<std::size_t>(sample_rate * clip_seconds); }
  double effective_fmax() const { return mel_fmax > 0.0 ? mel_fmax : sample_rate / 2.0; }

  static RunConfig load(const std::string& path);
  static RunConfig from_json_text(const std::string& text);
  std::string to_json_text() const;
  void save(const std::string& path) const;
  void validate() const;
};

}  // namespace solido
