#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "solido/bundle.hpp"
#include "solido/dataset.hpp"
#include "solido/training.hpp"

namespace solido {

// 100 * matches / l.
double bit_accuracy(const WatermarkBits& decoded, const WatermarkBits& truth);

// 10*log10(sum ref^2 / sum (ref-test)^2); +inf when test == ref.
double snr_db(const std::vector<double>& reference, const std::vector<double>& test);
std::string format_db(double v);  // "inf" sentinel for infinities

// One evaluation row: a single attack or an ordered pair applied first-to-last.
struct AttackChain {
  std::vector<dsp::AttackSpec> stages;
  std::string label() const;
};

struct RobustnessRow {
  std::string attack;
  double acc = 0.0;      // percent
  double snr = 0.0;      // watermarked vs attacked, dB
  double mel_l1 = 0.0;   // mean |delta| over log1p mel bins
  double stft_l1 = 0.0;  // mean |delta| over log magnitude bins
};

struct RobustnessReport {
  std::vector<RobustnessRow> rows;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::size_t clip_count = 0;

  std::string to_csv() const;
  std::string to_text() const;
};

// Individual attacks at inference intensities (GN 5/10/15/20 dB, echo, RSC 50%,
// TPDF dither, LPF 3 kHz, BPF 0.3-8 kHz, PN 0.3 and 0.5, stretch 0.75/1.25)
// plus the seven compound pairs.
std::vector<AttackChain> default_eval_attacks(double sample_rate);

// For each clip and chain: fresh payload, generate, attack in stage order,
// extract. Deterministic in (bundle, data, attacks, rng seed).
RobustnessReport evaluate_robustness(const ModelBundle& bundle, const Dataset& data,
                                     const std::vector<AttackChain>& attacks, Rng& rng);

// Mean clean ACC over fresh random payloads, cycling the dataset's conditioners.
double clean_accuracy(const ModelBundle& bundle, const Dataset& data, std::size_t n_payloads,
                      Rng& rng);

struct CapacityResult {
  std::size_t bits = 0;
  double clean_acc = 0.0;
  double bits_per_second = 0.0;
  std::size_t steps_run = 0;
};

// Fine-tunes one fresh model per payload size from the same base config and
// probes clean accuracy; the ACC-vs-capacity table.
std::vector<CapacityResult> capacity_sweep(const RunConfig& base, const Dataset& data,
                                           const std::vector<std::size_t>& capacities,
                                           const FinetuneOptions& opts);
std::string capacity_table_csv(const std::vector<CapacityResult>& rows);

}  // namespace solido
