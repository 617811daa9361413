#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "solido/eval.hpp"

using namespace solido;

namespace {

RunConfig toy_config() {
  RunConfig cfg;
  cfg.sample_rate = 800.0;
  cfg.clip_seconds = 0.16;
  cfg.dataset_clips = 3;
  cfg.window_len = 32;
  cfg.hop = 16;
  cfg.n_mels = 4;
  cfg.diffusion_steps = 3;
  cfg.channels = 6;
  cfg.dilations = {1, 2};
  cfg.step_embed_dim = 8;
  cfg.payload_bits = 8;
  cfg.ext_hidden = 16;
  return cfg;
}

Dataset toy_dataset(const RunConfig& cfg) {
  Rng rng(7);
  dsp::MelFilterbank fb =
      dsp::MelFilterbank::make(cfg.n_mels, cfg.window_len, cfg.sample_rate, cfg.mel_fmin,
                               cfg.sample_rate / 2.0);
  return synth_dataset(cfg.dataset_clips, cfg.clip_seconds, cfg.sample_rate, rng, fb,
                       cfg.window_len, cfg.hop);
}

}  // namespace

TEST_CASE("bit_accuracy counts matches as a percentage") {
  WatermarkBits a{{1, 0, 1, 0}};
  CHECK(bit_accuracy(a, a) == 100.0);
  WatermarkBits inv{{0, 1, 0, 1}};
  CHECK(bit_accuracy(inv, a) == 0.0);
  WatermarkBits half{{1, 0, 0, 1}};
  CHECK(bit_accuracy(half, a) == 50.0);
}

TEST_CASE("snr_db oracle") {
  std::vector<double> ref = {0.5, -0.25, 0.75, 0.1};
  CHECK(std::isinf(snr_db(ref, ref)));
  CHECK(format_db(snr_db(ref, ref)) == "inf");

  // zero test signal: noise equals reference, SNR = 0 dB
  std::vector<double> zero(ref.size(), 0.0);
  CHECK(snr_db(ref, zero) == doctest::Approx(0.0).epsilon(1e-12));

  // constructed noise at exactly -20 dB relative power
  double p_ref = 0.0;
  for (double v : ref) p_ref += v * v;
  std::vector<double> test = ref;
  double target = std::sqrt(0.01 * p_ref / static_cast<double>(ref.size()));
  for (std::size_t i = 0; i < test.size(); ++i) test[i] += (i % 2 ? target : -target);
  CHECK(snr_db(ref, test) == doctest::Approx(20.0).epsilon(1e-9));
}

TEST_CASE("attack chain labels join stage names") {
  AttackChain none{{dsp::AttackSpec{}}};
  CHECK(none.label() == "non");
  AttackChain pair{{dsp::parse_attack("gn_15"), dsp::parse_attack("echo")}};
  CHECK(pair.label().find('+') != std::string::npos);
}

TEST_CASE("default attack list has unique labels and both stretch factors") {
  auto attacks = default_eval_attacks(8000.0);
  CHECK(attacks.size() >= 15);
  std::set<std::string> labels;
  std::size_t compound = 0, stretch = 0;
  for (const auto& a : attacks) {
    CHECK(labels.insert(a.label()).second);
    if (a.stages.size() == 2) ++compound;
    for (const auto& s : a.stages)
      if (s.kind == dsp::AttackKind::kTimeStretch) ++stretch;
  }
  CHECK(compound == 7);
  CHECK(stretch == 2);
}

TEST_CASE("compound chains compose stage by stage in order") {
  // deterministic stages so the manual composition is exact
  dsp::AttackSpec echo = dsp::parse_attack("echo");
  dsp::AttackSpec ts = dsp::parse_attack("ts_0.75");

  dsp::AudioClip clip;
  clip.sample_rate = 8000.0;
  clip.samples.resize(4000);
  Rng rng(3);
  for (double& s : clip.samples) s = 0.2 * rng.gaussian();

  Rng unused(0);
  dsp::AudioClip manual = dsp::apply_attack(dsp::apply_attack(clip, echo, unused), ts, unused);
  dsp::AudioClip swapped = dsp::apply_attack(dsp::apply_attack(clip, ts, unused), echo, unused);

  // order matters: stretching after the echo rescales the echo delay, while
  // echoing the stretched clip keeps the delay at its nominal 100 ms
  REQUIRE(manual.length() == swapped.length());
  bool differ = false;
  for (std::size_t i = 0; i < manual.length(); ++i)
    differ = differ || manual.samples[i] != swapped.samples[i];
  CHECK(differ);
}

TEST_CASE("evaluate_robustness emits one row per chain") {
  RunConfig cfg = toy_config();
  ModelBundle bundle = ModelBundle::create(cfg);
  Rng arng(cfg.seed);
  bundle.attach_adapters(arng);
  Dataset data = toy_dataset(cfg);

  std::vector<AttackChain> attacks = {
      AttackChain{{dsp::AttackSpec{}}},
      AttackChain{{dsp::parse_attack("echo")}},
      AttackChain{{dsp::parse_attack("rsc_50")}},
  };
  Rng rng(11);
  RobustnessReport rep = evaluate_robustness(bundle, data, attacks, rng);
  REQUIRE(rep.rows.size() == attacks.size());
  CHECK(rep.clip_count == data.size());
  CHECK(rep.rows[0].attack == "non");
  CHECK(std::isinf(rep.rows[0].snr));  // no distortion on the Non row
  for (const auto& row : rep.rows) {
    CHECK(row.acc >= 0.0);
    CHECK(row.acc <= 100.0);
    CHECK(row.mel_l1 >= 0.0);
    CHECK(row.stft_l1 >= 0.0);
  }
  CHECK(!rep.config_hash.empty());

  // duplicate labels are rejected
  std::vector<AttackChain> dup = {attacks[1], attacks[1]};
  CHECK_THROWS_AS(evaluate_robustness(bundle, data, dup, rng), Error);
}

TEST_CASE("report serialization includes every row") {
  RobustnessRow r1{"Non", 100.0, std::numeric_limits<double>::infinity(), 0.0, 0.0};
  RobustnessRow r2{"GN-5dB", 62.5, 5.0, 0.31, 0.72};
  RobustnessReport rep{{r1, r2}, 42, "deadbeef", 4};
  std::string csv = rep.to_csv();
  CHECK(csv.find("Non") != std::string::npos);
  CHECK(csv.find("GN-5dB") != std::string::npos);
  CHECK(csv.find("inf") != std::string::npos);
  std::string text = rep.to_text();
  CHECK(text.find("GN-5dB") != std::string::npos);
  CHECK(text.find("deadbeef") != std::string::npos);
}

TEST_CASE("untrained decoder sits at chance accuracy") {
  RunConfig cfg = toy_config();
  ModelBundle bundle = ModelBundle::create(cfg);
  Rng arng(cfg.seed);
  bundle.attach_adapters(arng);
  Dataset data = toy_dataset(cfg);
  Rng rng(13);
  // 144 payloads x 8 bits = 1152 bits; a fresh pipeline must be near 50%
  double acc = clean_accuracy(bundle, data, 144, rng);
  CHECK(acc > 38.0);
  CHECK(acc < 62.0);
}

TEST_CASE("capacity table lists bits per second") {
  CapacityResult a{8, 97.5, 16.0, 120};
  CapacityResult b{16, 88.0, 32.0, 300};
  std::string csv = capacity_table_csv({a, b});
  CHECK(csv.find("bits") != std::string::npos);
  CHECK(csv.find("97.5") != std::string::npos);
  CHECK(csv.find("32") != std::string::npos);
}
