#include "solido/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "solido/wav.hpp"

namespace solido {

std::uint64_t Dataset::content_hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ULL;
  };
  for (const auto& clip : clips) {
    mix(clip.length());
    for (double s : clip.samples) mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(std::llround(s * 1e12))));
  }
  return h;
}

Dataset synth_dataset(std::size_t n_clips, double duration_s, double sample_rate, Rng& rng,
                      const dsp::MelFilterbank& fb, std::size_t window_len, std::size_t hop) {
  Dataset ds;
  std::size_t n_samples = static_cast<std::size_t>(sample_rate * duration_s);
  require(n_samples >= 1, "synth_dataset: empty clip geometry");

  for (std::size_t c = 0; c < n_clips; ++c) {
    dsp::AudioClip clip;
    clip.sample_rate = sample_rate;
    clip.samples.assign(n_samples, 0.0);

    double f0 = rng.uniform(90.0, 300.0);
    std::size_t harmonics = 3 + rng.uniform_int(4);  // 3..6
    // ADSR fractions of the clip: attack, decay, sustain level, release.
    double attack = rng.uniform(0.02, 0.15);
    double decay = rng.uniform(0.05, 0.2);
    double sustain = rng.uniform(0.4, 0.9);
    double release = rng.uniform(0.1, 0.3);

    for (std::size_t k = 0; k < harmonics; ++k) {
      double freq = f0 * static_cast<double>(k + 1);
      if (freq >= sample_rate / 2.0) break;
      double amp = 1.0 / static_cast<double>(k + 1) * rng.uniform(0.5, 1.0);
      double phase = rng.uniform(0.0, 2.0 * M_PI);
      for (std::size_t i = 0; i < n_samples; ++i)
        clip.samples[i] += amp * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / sample_rate + phase);
    }

    for (std::size_t i = 0; i < n_samples; ++i) {
      double pos = static_cast<double>(i) / static_cast<double>(n_samples);
      double env;
      if (pos < attack)
        env = pos / attack;
      else if (pos < attack + decay)
        env = 1.0 - (1.0 - sustain) * (pos - attack) / decay;
      else if (pos < 1.0 - release)
        env = sustain;
      else
        env = sustain * (1.0 - pos) / release;
      clip.samples[i] *= env;
    }

    // -30 dB noise floor relative to full scale.
    double noise_amp = std::pow(10.0, -30.0 / 20.0);
    for (double& s : clip.samples) s += noise_amp * rng.gaussian();

    double peak = 0.0;
    for (double s : clip.samples) peak = std::max(peak, std::abs(s));
    if (peak > 0.0) {
      double gain = 0.9 * rng.uniform(0.5, 1.0) / peak;
      for (double& s : clip.samples) s *= gain;
    }

    ds.mels.push_back(dsp::mel_spectrogram(clip, fb, window_len, hop));
    ds.clips.push_back(std::move(clip));
  }
  return ds;
}

Dataset load_wav_dataset(const std::string& dir, const RunConfig& cfg, const dsp::MelFilterbank& fb) {
  namespace fs = std::filesystem;
  require(fs::is_directory(dir), "load_wav_dataset: not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".wav") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  require(!files.empty(), "load_wav_dataset: no .wav files in " + dir);

  Dataset ds;
  std::size_t seg = cfg.clip_samples();
  for (const auto& f : files) {
    dsp::AudioClip full = wav_read(f.string());
    for (std::size_t off = 0; off + seg <= full.length(); off += seg) {
      dsp::AudioClip clip;
      clip.sample_rate = full.sample_rate;
      clip.samples.assign(full.samples.begin() + static_cast<std::ptrdiff_t>(off),
                          full.samples.begin() + static_cast<std::ptrdiff_t>(off + seg));
      ds.mels.push_back(dsp::mel_spectrogram(clip, fb, cfg.window_len, cfg.hop));
      ds.clips.push_back(std::move(clip));
    }
  }
  require(!ds.clips.empty(), "load_wav_dataset: files shorter than one clip segment");
  return ds;
}

}  // namespace solido
