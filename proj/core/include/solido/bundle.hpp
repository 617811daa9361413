#pragma once

#include <string>
#include <vector>

#include "solido/codec.hpp"
#include "solido/config.hpp"
#include "solido/diffusion.hpp"

namespace solido {

// Everything a run needs: the frozen vocoder with its adapters, the watermark
// encoder/decoder, the schedule and the mel filterbank, built deterministically
// from one config.
struct ModelBundle {
  RunConfig cfg;
  NoiseSchedule sched;
  dsp::MelFilterbank fb;
  DenoiserNetwork vocoder;
  EncoderNet enc;
  DecoderNet dec;
  bool adapters_attached = false;

  static ModelBundle create(const RunConfig& cfg);

  // Freezes the vocoder base and attaches fresh adapters to the final five
  // convolutions.
  void attach_adapters(Rng& rng);
  void merge_adapters();

  std::vector<Parameter*> all_parameters();
  std::vector<Parameter*> sdft_trainables();   // adapters + encoder + decoder
  std::vector<Parameter*> vocoder_base();      // frozen W_G set

  std::size_t clip_samples() const { return cfg.clip_samples(); }

  // sigma = Enc(w); s_hat_T = sigma + s_T; full reverse chain.
  Tensor generate_tensor(const WatermarkBits& w, const dsp::Spectrogram& mel, Rng& rng) const;
  dsp::AudioClip generate(const WatermarkBits& w, const dsp::Spectrogram& mel, Rng& rng) const;
  // Unwatermarked output from the same noise stream (sigma = 0).
  dsp::AudioClip generate_clean(const dsp::Spectrogram& mel, Rng& rng) const;
  WatermarkBits extract(const dsp::AudioClip& clip) const;

  void save(const std::string& path) const;
  static ModelBundle load(const std::string& path);

  dsp::AudioClip clip_from_tensor(const Tensor& x) const;
};

}  // namespace solido
