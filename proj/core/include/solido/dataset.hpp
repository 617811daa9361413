#pragma once

#include <string>
#include <vector>

#include "solido/config.hpp"
#include "solido/dsp.hpp"
#include "solido/rng.hpp"

namespace solido {

struct Dataset {
  std::vector<dsp::AudioClip> clips;
  std::vector<dsp::Spectrogram> mels;  // paired conditioners

  std::size_t size() const { return clips.size(); }
  // FNV-1a over the quantized sample stream; used for determinism replays.
  std::uint64_t content_hash() const;
};

// Speech-like synthetic clips: 3-6 harmonics of a random f0 in [90, 300] Hz
// under random ADSR envelopes, plus a -30 dB noise floor. Peak <= 0.9.
Dataset synth_dataset(std::size_t n_clips, double duration_s, double sample_rate, Rng& rng,
                      const dsp::MelFilterbank& fb, std::size_t window_len, std::size_t hop);

// WAV ingestion: every file in dir is segmented into fixed-duration clips.
Dataset load_wav_dataset(const std::string& dir, const RunConfig& cfg,
                         const dsp::MelFilterbank& fb);

}  // namespace solido
