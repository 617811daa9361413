#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "solido/common.hpp"
#include "solido/rng.hpp"

namespace solido::dsp {

// Mono sample buffer, nominal range [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  double sample_rate = 0.0;

  std::size_t length() const { return samples.size(); }
  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

struct Spectrogram {
  std::vector<double> magnitudes;  // frames x bins, row-major, non-negative
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::size_t frame_hop = 0;
  std::size_t window_len = 0;

  double at(std::size_t f, std::size_t b) const { return magnitudes[f * bins + b]; }
};

// Triangular mel filters over the bins of a real DFT of size window_len.
struct MelFilterbank {
  std::vector<double> weights;  // n_mels x bins, row-major
  std::size_t n_mels = 0;
  std::size_t bins = 0;
  double fmin = 0.0;
  double fmax = 0.0;

  static MelFilterbank make(std::size_t n_mels, std::size_t window_len, double sample_rate,
                            double fmin, double fmax);
};

// Hann window and real-DFT basis shared by the pure spectrogram functions and
// the differentiable spectrogram ops. Cached per window length.
struct DftTables {
  std::size_t window_len = 0;
  std::size_t bins = 0;            // window_len / 2 + 1
  std::vector<double> window;      // Hann, length window_len
  std::vector<double> cos_basis;   // bins x window_len, includes window
  std::vector<double> sin_basis;   // bins x window_len, includes window
};
std::shared_ptr<const DftTables> dft_tables(std::size_t window_len);

// Frame count under the no-padding policy; a clip shorter than the window
// yields one zero-padded frame.
std::size_t stft_frames(std::size_t length, std::size_t window_len, std::size_t hop);

Spectrogram stft_magnitude(const AudioClip& clip, std::size_t window_len, std::size_t hop);

// fb applied to the power spectrogram, then log(1 + x) compression.
Spectrogram mel_spectrogram(const AudioClip& clip, const MelFilterbank& fb, std::size_t window_len,
                            std::size_t hop);

// ---- Attack simulator -------------------------------------------------------

enum class AttackKind {
  kNone,
  kGaussianNoise,
  kEcho,
  kRearCrop,
  kDither,
  kLowpass,
  kBandpass,
  kPinkNoise,
  kTimeStretch,
};

enum class DitherPdf { kRpdf, kTpdf };

struct AttackSpec {
  AttackKind kind = AttackKind::kNone;
  double snr_db = 20.0;          // gaussian_noise
  double attenuation = 0.4;      // echo
  double delay_ms = 100.0;       // echo
  double crop_rate = 0.25;       // rear_crop
  bool crop_symmetric = false;   // rear_crop: split the cut between front and rear
  DitherPdf pdf = DitherPdf::kRpdf;
  double level = 0.5;            // pink_noise, noise-to-signal RMS ratio
  double stretch_factor = 1.0;   // time_stretch
  double cutoff_hz = 3000.0;     // lowpass
  double band_lo_hz = 300.0;     // bandpass
  double band_hi_hz = 8000.0;    // bandpass

  std::string name() const;
};

AttackSpec parse_attack(const std::string& name);

inline constexpr double kDitherLsb = 1.0 / 32768.0;  // 16-bit step

AudioClip apply_gaussian_noise(const AudioClip& clip, double snr_db, Rng& rng);
AudioClip apply_echo(const AudioClip& clip, double attenuation = 0.4, double delay_ms = 100.0);
AudioClip apply_rear_crop(const AudioClip& clip, double rate, bool symmetric = false);
AudioClip apply_dither(const AudioClip& clip, DitherPdf pdf, Rng& rng, double lsb = kDitherLsb);
AudioClip apply_lowpass(const AudioClip& clip, double cutoff_hz);
AudioClip apply_bandpass(const AudioClip& clip, double lo_hz, double hi_hz);
AudioClip apply_pink_noise(const AudioClip& clip, double level, Rng& rng);
AudioClip apply_time_stretch(const AudioClip& clip, double factor);

AudioClip apply_attack(const AudioClip& clip, const AttackSpec& spec, Rng& rng);

// Uniform draw over the five training operations of the attack simulator:
// none, gaussian noise at 15-20 dB, echo, rear crop 25%, RPDF dither.
AttackSpec draw_training_attack(Rng& rng);
AudioClip simulate_attack(const AudioClip& clip, Rng& rng, AttackSpec* drawn = nullptr);

// Pink noise generator (Voss-McCartney), unit-scale before RMS normalization.
std::vector<double> pink_noise(std::size_t n, Rng& rng);

// Linear-phase windowed-sinc FIR taps (Hamming window, odd length).
std::vector<double> windowed_sinc_lowpass(double cutoff_hz, double sample_rate, std::size_t taps);
std::vector<double> windowed_sinc_bandpass(double lo_hz, double hi_hz, double sample_rate,
                                           std::size_t taps);
// Zero-phase same-length application of a symmetric odd-length FIR.
std::vector<double> fir_zero_phase(const std::vector<double>& x, const std::vector<double>& taps);

double rms(const std::vector<double>& x);
double signal_power(const std::vector<double>& x);

}  // namespace solido::dsp
