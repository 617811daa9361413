#include "solido/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace solido {

double bit_accuracy(const WatermarkBits& decoded, const WatermarkBits& truth) {
  require(decoded.bits.size() == truth.bits.size(), "bit_accuracy: length mismatch");
  require(!truth.bits.empty(), "bit_accuracy: empty payload");
  std::size_t matches = 0;
  for (std::size_t i = 0; i < truth.bits.size(); ++i)
    if (decoded.bits[i] == truth.bits[i]) ++matches;
  return 100.0 * static_cast<double>(matches) / static_cast<double>(truth.bits.size());
}

double snr_db(const std::vector<double>& reference, const std::vector<double>& test) {
  require(reference.size() == test.size(), "snr_db: length mismatch");
  double p_ref = 0.0, p_err = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    p_ref += reference[i] * reference[i];
    double e = reference[i] - test[i];
    p_err += e * e;
  }
  require(p_ref > 0.0, "snr_db: zero reference");
  if (p_err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(p_ref / p_err);
}

std::string format_db(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

std::string AttackChain::label() const {
  if (stages.empty()) return "Non";
  std::string out;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (i) out += "+";
    out += stages[i].name();
  }
  return out;
}

namespace {

dsp::AttackSpec gn(double snr) {
  dsp::AttackSpec s;
  s.kind = dsp::AttackKind::kGaussianNoise;
  s.snr_db = snr;
  return s;
}
dsp::AttackSpec echo() {
  dsp::AttackSpec s;
  s.kind = dsp::AttackKind::kEcho;
  return s;
}
dsp::AttackSpec rsc(double rate) {
  dsp::AttackSpec s;
  s.kind = dsp::AttackKind::kRearCrop;
  s.crop_rate = rate;
  return s;
}
dsp::AttackSpec dither(dsp::DitherPdf pdf) {
  dsp::AttackSpec s;
  s.kind = dsp::AttackKind::kDither;
  s.pdf = pdf;
  return s;
}
dsp::AttackSpec lpf(double cutoff) {
  dsp::AttackSpec s;
  s.kind = dsp::AttackKind::kLowpass;
  s.cutoff_hz = cutoff;
  return s;
}
dsp::AttackSpec bpf(double lo, double hi) {
  dsp::AttackSpec s;
  s.kind = dsp::AttackKind::kBandpass;
  s.band_lo_hz = lo;
  s.band_hi_hz = hi;
  return s;
}
dsp::AttackSpec pn(double level) {
  dsp::AttackSpec s;
  s.kind = dsp::AttackKind::kPinkNoise;
  s.level = level;
  return s;
}
dsp::AttackSpec stretch(double factor) {
  dsp::AttackSpec s;
  s.kind = dsp::AttackKind::kTimeStretch;
  s.stretch_factor = factor;
  return s;
}

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// Mean absolute difference between two spectrograms of the same geometry,
// truncated to the shorter frame count when an attack changed the length.
double spec_l1(const dsp::Spectrogram& a, const dsp::Spectrogram& b) {
  require(a.bins == b.bins, "spec_l1: bin mismatch");
  std::size_t frames = std::min(a.frames, b.frames);
  double acc = 0.0;
  for (std::size_t f = 0; f < frames; ++f)
    for (std::size_t k = 0; k < a.bins; ++k) acc += std::abs(a.at(f, k) - b.at(f, k));
  return acc / static_cast<double>(frames * a.bins);
}

dsp::Spectrogram log_magnitude(const dsp::AudioClip& clip, std::size_t window_len,
                               std::size_t hop) {
  dsp::Spectrogram s = dsp::stft_magnitude(clip, window_len, hop);
  for (double& v : s.magnitudes) v = std::log(v + 1e-7);
  return s;
}

}  // namespace

std::vector<AttackChain> default_eval_attacks(double sample_rate) {
  std::vector<AttackChain> out;
  auto one = [&](dsp::AttackSpec s) { out.push_back({{s}}); };
  auto pair = [&](dsp::AttackSpec a, dsp::AttackSpec b) { out.push_back({{a, b}}); };

  out.push_back({});  // Non
  for (double snr : {5.0, 10.0, 15.0, 20.0}) one(gn(snr));
  one(echo());
  one(rsc(0.5));
  one(dither(dsp::DitherPdf::kTpdf));
  if (3000.0 < sample_rate / 2.0) one(lpf(3000.0));
  one(bpf(300.0, std::min(8000.0, 0.95 * sample_rate / 2.0)));
  one(pn(0.3));
  one(pn(0.5));
  one(stretch(0.75));
  one(stretch(1.25));

  dsp::AttackSpec band = bpf(300.0, std::min(8000.0, 0.95 * sample_rate / 2.0));
  pair(gn(15.0), band);
  pair(gn(15.0), echo());
  pair(gn(15.0), dither(dsp::DitherPdf::kTpdf));
  pair(gn(15.0), pn(0.5));
  pair(pn(0.5), band);
  pair(pn(0.5), echo());
  pair(pn(0.5), dither(dsp::DitherPdf::kTpdf));
  return out;
}

RobustnessReport evaluate_robustness(const ModelBundle& bundle, const Dataset& data,
                                     const std::vector<AttackChain>& attacks, Rng& rng) {
  require(data.size() >= 1, "evaluate_robustness: empty dataset");
  require(!attacks.empty(), "evaluate_robustness: empty attack list");
  {
    std::set<std::string> seen;
    for (const auto& a : attacks)
      require(seen.insert(a.label()).second,
              "evaluate_robustness: duplicate attack row '" + a.label() + "'");
  }

  const RunConfig& cfg = bundle.cfg;
  RobustnessReport rep;
  rep.seed = cfg.seed;
  rep.config_hash = fnv1a_hex(cfg.to_json_text());
  rep.clip_count = data.size();

  // Watermarked clips are generated once and shared by every row, so the rows
  // differ only in the attack applied.
  std::vector<dsp::AudioClip> marked(data.size());
  std::vector<WatermarkBits> payloads;
  payloads.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    payloads.push_back(WatermarkBits::random(cfg.payload_bits, rng));
    marked[i] = bundle.generate(payloads[i], data.mels[i], rng);
  }

  std::vector<dsp::Spectrogram> ref_mel(data.size()), ref_stft(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    ref_mel[i] = dsp::mel_spectrogram(marked[i], bundle.fb, cfg.window_len, cfg.hop);
    ref_stft[i] = log_magnitude(marked[i], cfg.window_len, cfg.hop);
  }

  for (const AttackChain& chain : attacks) {
    RobustnessRow row;
    row.attack = chain.label();
    double snr_acc = 0.0;
    std::size_t snr_n = 0;
    std::size_t snr_inf = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      dsp::AudioClip attacked = marked[i];
      for (const auto& stage : chain.stages) attacked = dsp::apply_attack(attacked, stage, rng);
      row.acc += bit_accuracy(bundle.extract(attacked), payloads[i]);
      if (attacked.length() == marked[i].length()) {
        double v = snr_db(marked[i].samples, attacked.samples);
        if (std::isinf(v)) {
          ++snr_inf;
        } else {
          snr_acc += v;
          ++snr_n;
        }
      }
      row.mel_l1 += spec_l1(ref_mel[i],
                            dsp::mel_spectrogram(attacked, bundle.fb, cfg.window_len, cfg.hop));
      row.stft_l1 += spec_l1(ref_stft[i], log_magnitude(attacked, cfg.window_len, cfg.hop));
    }
    double n = static_cast<double>(data.size());
    row.acc /= n;
    row.mel_l1 /= n;
    row.stft_l1 /= n;
    // A chain that left every clip untouched (e.g. a lone Non stage) averages
    // to infinite SNR; finite values, when present, dominate the mean.
    row.snr = snr_n       ? snr_acc / static_cast<double>(snr_n)
              : snr_inf   ? std::numeric_limits<double>::infinity()
              : chain.stages.empty() ? std::numeric_limits<double>::infinity()
                                     : std::numeric_limits<double>::quiet_NaN();
    rep.rows.push_back(row);
  }
  return rep;
}

std::string RobustnessReport::to_csv() const {
  std::ostringstream os;
  os << "# seed=" << seed << " config_hash=" << config_hash << " clips=" << clip_count << "\n";
  os << "attack,acc_percent,snr_db,mel_l1,log_stft_l1\n";
  os << std::fixed << std::setprecision(4);
  for (const auto& r : rows)
    os << r.attack << "," << r.acc << "," << format_db(r.snr) << "," << r.mel_l1 << ","
       << r.stft_l1 << "\n";
  return os.str();
}

std::string RobustnessReport::to_text() const {
  std::ostringstream os;
  os << "robustness report  (seed " << seed << ", config " << config_hash << ", " << clip_count
     << " clips)\n";
  os << std::left << std::setw(22) << "attack" << std::right << std::setw(10) << "ACC%"
     << std::setw(10) << "SNR dB" << std::setw(10) << "mel-L1" << std::setw(12) << "logSTFT-L1"
     << "\n";
  os << std::fixed << std::setprecision(2);
  for (const auto& r : rows)
    os << std::left << std::setw(22) << r.attack << std::right << std::setw(10) << r.acc
       << std::setw(10) << format_db(r.snr) << std::setw(10) << r.mel_l1 << std::setw(12)
       << r.stft_l1 << "\n";
  return os.str();
}

double clean_accuracy(const ModelBundle& bundle, const Dataset& data, std::size_t n_payloads,
                      Rng& rng) {
  require(data.size() >= 1 && n_payloads >= 1, "clean_accuracy: nothing to evaluate");
  double total = 0.0;
  for (std::size_t i = 0; i < n_payloads; ++i) {
    WatermarkBits w = WatermarkBits::random(bundle.cfg.payload_bits, rng);
    dsp::AudioClip clip = bundle.generate(w, data.mels[i % data.size()], rng);
    total += bit_accuracy(bundle.extract(clip), w);
  }
  return total / static_cast<double>(n_payloads);
}

std::vector<CapacityResult> capacity_sweep(const RunConfig& base, const Dataset& data,
                                           const std::vector<std::size_t>& capacities,
                                           const FinetuneOptions& opts) {
  std::vector<CapacityResult> out;
  for (std::size_t l : capacities) {
    RunConfig cfg = base;
    cfg.payload_bits = l;
    cfg.validate();
    ModelBundle bundle = ModelBundle::create(cfg);
    Rng rng(cfg.seed);
    bundle.attach_adapters(rng);
    FinetuneResult res = finetune(bundle, data, opts, rng);

    CapacityResult row;
    row.bits = l;
    row.steps_run = res.steps_run;
    Rng eval_rng(cfg.seed + 1);
    row.clean_acc = clean_accuracy(bundle, data, 32, eval_rng);
    row.bits_per_second = static_cast<double>(l) / cfg.clip_seconds;
    out.push_back(row);
  }
  return out;
}

std::string capacity_table_csv(const std::vector<CapacityResult>& rows) {
  std::ostringstream os;
  os << "capacity_bits,bps,clean_acc_percent,steps\n";
  os << std::fixed << std::setprecision(4);
  for (const auto& r : rows)
    os << r.bits << "," << r.bits_per_second << "," << r.clean_acc << "," << r.steps_run << "\n";
  return os.str();
}

}  // namespace solido
