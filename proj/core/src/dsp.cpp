#include "solido/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace solido::dsp {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

std::shared_ptr<const DftTables> dft_tables(std::size_t window_len) {
  static std::map<std::size_t, std::shared_ptr<const DftTables>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(window_len);
  if (it != cache.end()) return it->second;

  auto t = std::make_shared<DftTables>();
  t->window_len = window_len;
  t->bins = window_len / 2 + 1;
  t->window.resize(window_len);
  for (std::size_t n = 0; n < window_len; ++n)
    t->window[n] = 0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(n) / static_cast<double>(window_len)));
  t->cos_basis.resize(t->bins * window_len);
  t->sin_basis.resize(t->bins * window_len);
  for (std::size_t k = 0; k < t->bins; ++k) {
    for (std::size_t n = 0; n < window_len; ++n) {
      double ang = 2.0 * M_PI * static_cast<double>(k) * static_cast<double>(n) / static_cast<double>(window_len);
      t->cos_basis[k * window_len + n] = std::cos(ang) * t->window[n];
      t->sin_basis[k * window_len + n] = -std::sin(ang) * t->window[n];
    }
  }
  cache[window_len] = t;
  return t;
}

std::size_t stft_frames(std::size_t length, std::size_t window_len, std::size_t hop) {
  if (length < window_len) return 1;
  return 1 + (length - window_len) / hop;
}

Spectrogram stft_magnitude(const AudioClip& clip, std::size_t window_len, std::size_t hop) {
  require(hop > 0, "stft_magnitude: hop must be positive");
  require(clip.length() >= 1, "stft_magnitude: empty clip");
  auto tables = dft_tables(window_len);
  Spectrogram out;
  out.window_len = window_len;
  out.frame_hop = hop;
  out.bins = tables->bins;
  out.frames = stft_frames(clip.length(), window_len, hop);
  out.magnitudes.assign(out.frames * out.bins, 0.0);

  const std::size_t L = clip.length();
  for (std::size_t f = 0; f < out.frames; ++f) {
    std::size_t start = f * hop;
    std::size_t avail = (start < L) ? std::min(window_len, L - start) : 0;
    for (std::size_t k = 0; k < out.bins; ++k) {
      const double* cb = &tables->cos_basis[k * window_len];
      const double* sb = &tables->sin_basis[k * window_len];
      double re = 0.0, im = 0.0;
      for (std::size_t n = 0; n < avail; ++n) {
        double x = clip.samples[start + n];
        re += cb[n] * x;
        im += sb[n] * x;
      }
      out.magnitudes[f * out.bins + k] = std::sqrt(re * re + im * im);
    }
  }
  return out;
}

MelFilterbank MelFilterbank::make(std::size_t n_mels, std::size_t window_len, double sample_rate,
                                  double fmin, double fmax) {
  require(n_mels >= 1 && fmin >= 0.0 && fmax > fmin, "MelFilterbank::make: bad parameters");
  require(fmax <= sample_rate / 2.0 + 1e-9, "MelFilterbank::make: fmax above Nyquist");
  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.bins = window_len / 2 + 1;
  fb.fmin = fmin;
  fb.fmax = fmax;
  fb.weights.assign(n_mels * fb.bins, 0.0);

  double mel_lo = hz_to_mel(fmin);
  double mel_hi = hz_to_mel(fmax);
  std::vector<double> centers(n_mels + 2);
  for (std::size_t m = 0; m < n_mels + 2; ++m)
    centers[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(m) / static_cast<double>(n_mels + 1));

  for (std::size_t m = 0; m < n_mels; ++m) {
    double lo = centers[m], mid = centers[m + 1], hi = centers[m + 2];
    for (std::size_t k = 0; k < fb.bins; ++k) {
      double f = static_cast<double>(k) * sample_rate / static_cast<double>(window_len);
      double w = 0.0;
      if (f > lo && f < mid)
        w = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi)
        w = (hi - f) / (hi - mid);
      fb.weights[m * fb.bins + k] = std::max(0.0, w);
    }
    // Degenerate rows (very narrow filters at small window sizes) get a unit
    // spike at the nearest bin so every row keeps a positive sum.
    double sum = 0.0;
    for (std::size_t k = 0; k < fb.bins; ++k) sum += fb.weights[m * fb.bins + k];
    if (sum <= 0.0) {
      std::size_t k = static_cast<std::size_t>(std::min<double>(
          static_cast<double>(fb.bins - 1), std::round(mid * static_cast<double>(window_len) / sample_rate)));
      fb.weights[m * fb.bins + k] = 1.0;
    }
  }
  return fb;
}

Spectrogram mel_spectrogram(const AudioClip& clip, const MelFilterbank& fb, std::size_t window_len,
                            std::size_t hop) {
  require(fb.bins == window_len / 2 + 1, "mel_spectrogram: filterbank bins do not match FFT bins");
  Spectrogram mag = stft_magnitude(clip, window_len, hop);
  Spectrogram out;
  out.window_len = window_len;
  out.frame_hop = hop;
  out.bins = fb.n_mels;
  out.frames = mag.frames;
  out.magnitudes.assign(out.frames * fb.n_mels, 0.0);
  for (std::size_t f = 0; f < mag.frames; ++f) {
    for (std::size_t m = 0; m < fb.n_mels; ++m) {
      double acc = 0.0;
      const double* w = &fb.weights[m * fb.bins];
      const double* row = &mag.magnitudes[f * mag.bins];
      for (std::size_t k = 0; k < fb.bins; ++k) acc += w[k] * row[k] * row[k];
      out.magnitudes[f * fb.n_mels + m] = std::log1p(acc);
    }
  }
  return out;
}

double rms(const std::vector<double>& x) {
  return std::sqrt(signal_power(x));
}

double signal_power(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return x.empty() ? 0.0 : acc / static_cast<double>(x.size());
}

// ---- Attacks ----------------------------------------------------------------

std::string AttackSpec::name() const {
  switch (kind) {
    case AttackKind::kNone: return "non";
    case AttackKind::kGaussianNoise: return "gn_" + std::to_string(static_cast<int>(snr_db)) + "db";
    case AttackKind::kEcho: return "echo";
    case AttackKind::kRearCrop: return "rsc_" + std::to_string(static_cast<int>(crop_rate * 100.0));
    case AttackKind::kDither: return pdf == DitherPdf::kRpdf ? "dither_rpdf" : "dither_tpdf";
    case AttackKind::kLowpass: return "lpf";
    case AttackKind::kBandpass: return "bpf";
    case AttackKind::kPinkNoise: return "pn_" + std::to_string(level).substr(0, 3);
    case AttackKind::kTimeStretch: return "ts_" + std::to_string(stretch_factor).substr(0, 4);
  }
  return "unknown";
}

AttackSpec parse_attack(const std::string& name) {
  AttackSpec s;
  auto starts = [&](const char* p) { return name.rfind(p, 0) == 0; };
  if (name == "non" || name == "none") {
    s.kind = AttackKind::kNone;
  } else if (starts("gn")) {
    s.kind = AttackKind::kGaussianNoise;
    auto pos = name.find('_');
    if (pos != std::string::npos) s.snr_db = std::stod(name.substr(pos + 1));
  } else if (name == "echo") {
    s.kind = AttackKind::kEcho;
  } else if (starts("rsc")) {
    s.kind = AttackKind::kRearCrop;
    auto pos = name.find('_');
    if (pos != std::string::npos) s.crop_rate = std::stod(name.substr(pos + 1)) / 100.0;
  } else if (starts("dither")) {
    s.kind = AttackKind::kDither;
    s.pdf = (name.find("tpdf") != std::string::npos) ? DitherPdf::kTpdf : DitherPdf::kRpdf;
  } else if (name == "lpf" || name == "lowpass") {
    s.kind = AttackKind::kLowpass;
  } else if (name == "bpf" || name == "bandpass") {
    s.kind = AttackKind::kBandpass;
  } else if (starts("pn")) {
    s.kind = AttackKind::kPinkNoise;
    auto pos = name.find('_');
    if (pos != std::string::npos) s.level = std::stod(name.substr(pos + 1));
  } else if (starts("ts")) {
    s.kind = AttackKind::kTimeStretch;
    auto pos = name.find('_');
    if (pos != std::string::npos) s.stretch_factor = std::stod(name.substr(pos + 1));
  } else {
    throw Error("unknown attack name: " + name);
  }
  return s;
}

AudioClip apply_gaussian_noise(const AudioClip& clip, double snr_db, Rng& rng) {
  require(std::isfinite(snr_db), "apply_gaussian_noise: snr_db must be finite; use kind none for no attack");
  double p_sig = signal_power(clip.samples);
  require(p_sig > 0.0, "apply_gaussian_noise: silent input has no defined SNR");
  double p_noise = p_sig / std::pow(10.0, snr_db / 10.0);
  double std_dev = std::sqrt(p_noise);
  AudioClip out = clip;
  for (double& v : out.samples) v += std_dev * rng.gaussian();
  return out;
}

AudioClip apply_echo(const AudioClip& clip, double attenuation, double delay_ms) {
  std::size_t d = static_cast<std::size_t>(std::llround(delay_ms * clip.sample_rate / 1000.0));
  require(d < clip.length(), "apply_echo: delay reaches past the clip");
  AudioClip out = clip;
  for (std::size_t n = clip.length(); n-- > d;) out.samples[n] += attenuation * clip.samples[n - d];
  return out;
}

AudioClip apply_rear_crop(const AudioClip& clip, double rate, bool symmetric) {
  require(rate > 0.0 && rate < 1.0, "apply_rear_crop: rate must be in (0,1)");
  std::size_t cut = static_cast<std::size_t>(std::floor(rate * static_cast<double>(clip.length())));
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  std::size_t front = symmetric ? cut / 2 : 0;
  std::size_t keep = clip.length() - cut;
  out.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(front),
                     clip.samples.begin() + static_cast<std::ptrdiff_t>(front + keep));
  return out;
}

AudioClip apply_dither(const AudioClip& clip, DitherPdf pdf, Rng& rng, double lsb) {
  AudioClip out = clip;
  for (double& v : out.samples) {
    double noise = (pdf == DitherPdf::kRpdf)
                       ? rng.uniform(-lsb / 2.0, lsb / 2.0)
                       : rng.uniform(-lsb / 2.0, lsb / 2.0) + rng.uniform(-lsb / 2.0, lsb / 2.0);
    v = std::round((v + noise) / lsb) * lsb;
  }
  return out;
}

std::vector<double> windowed_sinc_lowpass(double cutoff_hz, double sample_rate, std::size_t taps) {
  require(taps % 2 == 1, "windowed_sinc_lowpass: taps must be odd");
  require(cutoff_hz > 0.0 && cutoff_hz < sample_rate / 2.0, "windowed_sinc_lowpass: cutoff must be below Nyquist");
  double fc = cutoff_hz / sample_rate;
  std::vector<double> h(taps);
  std::ptrdiff_t m = static_cast<std::ptrdiff_t>(taps / 2);
  double sum = 0.0;
  for (std::ptrdiff_t i = -m; i <= m; ++i) {
    double v = (i == 0) ? 2.0 * fc : std::sin(2.0 * M_PI * fc * static_cast<double>(i)) / (M_PI * static_cast<double>(i));
    double w = 0.54 + 0.46 * std::cos(M_PI * static_cast<double>(i) / static_cast<double>(m));  // Hamming
    h[static_cast<std::size_t>(i + m)] = v * w;
    sum += v * w;
  }
  for (double& v : h) v /= sum;  // unit DC gain
  return h;
}

std::vector<double> windowed_sinc_bandpass(double lo_hz, double hi_hz, double sample_rate,
                                           std::size_t taps) {
  require(lo_hz > 0.0 && hi_hz > lo_hz, "windowed_sinc_bandpass: bad band edges");
  std::vector<double> hi = windowed_sinc_lowpass(hi_hz, sample_rate, taps);
  std::vector<double> lo = windowed_sinc_lowpass(lo_hz, sample_rate, taps);
  for (std::size_t i = 0; i < taps; ++i) hi[i] -= lo[i];
  return hi;
}

std::vector<double> fir_zero_phase(const std::vector<double>& x, const std::vector<double>& taps) {
  require(taps.size() % 2 == 1, "fir_zero_phase: taps must be odd-length");
  std::ptrdiff_t m = static_cast<std::ptrdiff_t>(taps.size() / 2);
  std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> y(x.size(), 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    std::ptrdiff_t k_lo = std::max<std::ptrdiff_t>(-m, i - n + 1);
    std::ptrdiff_t k_hi = std::min<std::ptrdiff_t>(m, i);
    for (std::ptrdiff_t k = k_lo; k <= k_hi; ++k) acc += taps[static_cast<std::size_t>(k + m)] * x[static_cast<std::size_t>(i - k)];
    y[static_cast<std::size_t>(i)] = acc;
  }
  return y;
}

namespace {
constexpr std::size_t kFilterTaps = 255;

double clamp_cutoff(double hz, double sample_rate) {
  double limit = 0.95 * sample_rate / 2.0;
  return std::min(hz, limit);
}
}  // namespace

AudioClip apply_lowpass(const AudioClip& clip, double cutoff_hz) {
  double fc = clamp_cutoff(cutoff_hz, clip.sample_rate);
  AudioClip out = clip;
  out.samples = fir_zero_phase(clip.samples, windowed_sinc_lowpass(fc, clip.sample_rate, kFilterTaps));
  return out;
}

AudioClip apply_bandpass(const AudioClip& clip, double lo_hz, double hi_hz) {
  double hi = clamp_cutoff(hi_hz, clip.sample_rate);
  require(lo_hz < hi, "apply_bandpass: band collapsed after Nyquist clamping");
  AudioClip out = clip;
  out.samples = fir_zero_phase(clip.samples, windowed_sinc_bandpass(lo_hz, hi, clip.sample_rate, kFilterTaps));
  return out;
}

std::vector<double> pink_noise(std::size_t n, Rng& rng) {
  // Voss-McCartney: sum of 16 white rows, row k updated every 2^k samples.
  constexpr std::size_t kRows = 16;
  std::vector<double> rows(kRows);
  for (double& r : rows) r = rng.uniform(-1.0, 1.0);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t idx = i + 1;
    for (std::size_t k = 0; k < kRows; ++k) {
      if (idx % (1ULL << k) == 0) rows[k] = rng.uniform(-1.0, 1.0);
    }
    double acc = rng.uniform(-1.0, 1.0);  // always-updated white row
    for (double r : rows) acc += r;
    out[i] = acc / static_cast<double>(kRows + 1);
  }
  return out;
}

AudioClip apply_pink_noise(const AudioClip& clip, double level, Rng& rng) {
  require(level > 0.0, "apply_pink_noise: level must be positive");
  double r_sig = rms(clip.samples);
  require(r_sig > 0.0, "apply_pink_noise: silent input");
  std::vector<double> noise = pink_noise(clip.length(), rng);
  double r_noise = rms(noise);
  double gain = level * r_sig / r_noise;
  AudioClip out = clip;
  for (std::size_t i = 0; i < out.length(); ++i) out.samples[i] += gain * noise[i];
  return out;
}

AudioClip apply_time_stretch(const AudioClip& clip, double factor) {
  require(factor >= 0.5 && factor <= 2.0, "apply_time_stretch: factor must be in [0.5, 2]");
  std::size_t out_len = static_cast<std::size_t>(std::llround(static_cast<double>(clip.length()) / factor));
  out_len = std::max<std::size_t>(out_len, 1);
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.resize(out_len);
  if (out_len == clip.length()) {
    out.samples = clip.samples;
    return out;
  }
  double scale = (out_len > 1) ? static_cast<double>(clip.length() - 1) / static_cast<double>(out_len - 1) : 0.0;
  for (std::size_t i = 0; i < out_len; ++i) {
    double pos = static_cast<double>(i) * scale;
    std::size_t i0 = static_cast<std::size_t>(pos);
    std::size_t i1 = std::min(i0 + 1, clip.length() - 1);
    double frac = pos - static_cast<double>(i0);
    out.samples[i] = (1.0 - frac) * clip.samples[i0] + frac * clip.samples[i1];
  }
  return out;
}

AudioClip apply_attack(const AudioClip& clip, const AttackSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case AttackKind::kNone: return clip;
    case AttackKind::kGaussianNoise: return apply_gaussian_noise(clip, spec.snr_db, rng);
    case AttackKind::kEcho: return apply_echo(clip, spec.attenuation, spec.delay_ms);
    case AttackKind::kRearCrop: return apply_rear_crop(clip, spec.crop_rate, spec.crop_symmetric);
    case AttackKind::kDither: return apply_dither(clip, spec.pdf, rng);
    case AttackKind::kLowpass: return apply_lowpass(clip, spec.cutoff_hz);
    case AttackKind::kBandpass: return apply_bandpass(clip, spec.band_lo_hz, spec.band_hi_hz);
    case AttackKind::kPinkNoise: return apply_pink_noise(clip, spec.level, rng);
    case AttackKind::kTimeStretch: return apply_time_stretch(clip, spec.stretch_factor);
  }
  throw Error("apply_attack: unknown kind");
}

AttackSpec draw_training_attack(Rng& rng) {
  AttackSpec s;
  switch (rng.uniform_int(5)) {
    case 0: s.kind = AttackKind::kNone; break;
    case 1:
      s.kind = AttackKind::kGaussianNoise;
      s.snr_db = rng.uniform(15.0, 20.0);
      break;
    case 2: s.kind = AttackKind::kEcho; break;
    case 3:
      s.kind = AttackKind::kRearCrop;
      s.crop_rate = 0.25;
      break;
    case 4:
      s.kind = AttackKind::kDither;
      s.pdf = DitherPdf::kRpdf;
      break;
  }
  return s;
}

AudioClip simulate_attack(const AudioClip& clip, Rng& rng, AttackSpec* drawn) {
  AttackSpec s = draw_training_attack(rng);
  if (drawn) *drawn = s;
  return apply_attack(clip, s, rng);
}

}  // namespace solido::dsp
