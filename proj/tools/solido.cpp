#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "solido/bundle.hpp"
#include "solido/checkpoint.hpp"
#include "solido/eval.hpp"
#include "solido/gradcheck.hpp"
#include "solido/training.hpp"
#include "solido/wav.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kDataError = 2;
constexpr int kNumericError = 3;

struct GlobalOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

solido::RunConfig load_config(const GlobalOpts& g) {
  solido::RunConfig cfg;
  if (!g.config_path.empty()) cfg = solido::RunConfig::load(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  cfg.validate();
  return cfg;
}

std::ostream& info(const GlobalOpts& g) {
  static std::ofstream null_sink;  // never opened: a silent stream
  return g.quiet ? static_cast<std::ostream&>(null_sink) : std::cout;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"solido: generative speech watermarking via diffusion noise injection"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags are accepted after the subcommand too

  GlobalOpts g;
  app.add_option("--config", g.config_path, "JSON run configuration");
  std::uint64_t seed_val = 0;
  auto* seed_opt = app.add_option("--seed", seed_val, "Override the config seed");
  app.add_flag("--quiet", g.quiet, "Suppress progress output");

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "Write a synthetic speech-like WAV corpus");
  std::string synth_out = "data";
  std::size_t synth_n = 0;  // 0: config value
  synth->add_option("--out", synth_out, "Output directory");
  synth->add_option("--clips", synth_n, "Number of clips (default: config)");

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "Train the diffusion vocoder base");
  std::string pre_out = "base.sldo";
  std::string pre_data;
  std::size_t pre_steps = 500;
  pre->add_option("--out", pre_out, "Checkpoint path");
  pre->add_option("--data-dir", pre_data, "WAV directory (default: synthetic corpus)");
  pre->add_option("--steps", pre_steps, "Training steps");

  // finetune
  auto* fin = app.add_subcommand("finetune", "Watermark fine-tuning (adapters + codec)");
  std::string fin_in, fin_out = "model.sldo", fin_data, fin_log;
  std::size_t fin_steps = 0;  // 0: config max_steps
  double fin_target = -1.0;
  fin->add_option("--in", fin_in, "Base checkpoint to start from (default: fresh)");
  fin->add_option("--out", fin_out, "Checkpoint path");
  fin->add_option("--data-dir", fin_data, "WAV directory (default: synthetic corpus)");
  fin->add_option("--steps", fin_steps, "Max steps (default: config)");
  fin->add_option("--target-acc", fin_target, "Early-stop clean accuracy, percent");
  fin->add_option("--log", fin_log, "JSON-lines training log path");

  // generate
  auto* gen = app.add_subcommand("generate", "Synthesize watermarked audio");
  std::string gen_ckpt = "model.sldo", gen_bits = "random", gen_out = "out.wav", gen_cond;
  gen->add_option("--ckpt", gen_ckpt, "Model checkpoint");
  gen->add_option("--bits", gen_bits, "Payload as hex, or 'random'");
  gen->add_option("--out", gen_out, "Output WAV");
  gen->add_option("--cond", gen_cond, "Conditioning WAV (default: synthetic clip)");

  // attack
  auto* atk = app.add_subcommand("attack", "Apply a distortion to a WAV file");
  std::string atk_kind = "gaussian_noise", atk_in, atk_out = "attacked.wav";
  double atk_snr = 20.0, atk_rate = 0.25, atk_level = 0.5, atk_cutoff = 3000.0;
  double atk_factor = 1.25, atk_lo = 300.0, atk_hi = 8000.0;
  atk->add_option("--kind", atk_kind, "Attack name");
  atk->add_option("--in", atk_in, "Input WAV")->required();
  atk->add_option("--out", atk_out, "Output WAV");
  atk->add_option("--snr", atk_snr, "Gaussian noise SNR dB");
  atk->add_option("--rate", atk_rate, "Crop rate");
  atk->add_option("--level", atk_level, "Pink noise level");
  atk->add_option("--cutoff", atk_cutoff, "Lowpass cutoff Hz");
  atk->add_option("--factor", atk_factor, "Time stretch factor");
  atk->add_option("--lo", atk_lo, "Bandpass low edge Hz");
  atk->add_option("--hi", atk_hi, "Bandpass high edge Hz");

  // extract
  auto* ext = app.add_subcommand("extract", "Recover the payload from a WAV file");
  std::string ext_ckpt = "model.sldo", ext_in;
  ext->add_option("--ckpt", ext_ckpt, "Model checkpoint");
  ext->add_option("--in", ext_in, "Input WAV")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Robustness report / capacity sweep");
  std::string ev_ckpt = "model.sldo", ev_out, ev_capacity, ev_data;
  std::size_t ev_clips = 8;
  ev->add_option("--ckpt", ev_ckpt, "Model checkpoint");
  ev->add_option("--out", ev_out, "CSV output path (default: stdout only)");
  ev->add_option("--capacity", ev_capacity, "Comma-separated payload sizes; trains per size");
  ev->add_option("--clips", ev_clips, "Clips to evaluate");
  ev->add_option("--data-dir", ev_data, "WAV directory (default: synthetic corpus)");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference suite over all ops");

  // inspect
  auto* ins = app.add_subcommand("inspect", "Print a checkpoint manifest");
  std::string ins_in;
  ins->add_option("--in", ins_in, "Checkpoint path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  if (seed_opt->count()) g.seed = seed_val;

  try {
    solido::RunConfig cfg = load_config(g);

    auto dataset_for = [&](const std::string& data_dir) {
      solido::dsp::MelFilterbank fb = solido::dsp::MelFilterbank::make(
          cfg.n_mels, cfg.window_len, cfg.sample_rate, cfg.mel_fmin, cfg.effective_fmax());
      if (!data_dir.empty()) return solido::load_wav_dataset(data_dir, cfg, fb);
      solido::Rng rng(cfg.seed);
      return solido::synth_dataset(cfg.dataset_clips, cfg.clip_seconds, cfg.sample_rate, rng, fb,
                                   cfg.window_len, cfg.hop);
    };

    if (synth->parsed()) {
      std::size_t n = synth_n ? synth_n : cfg.dataset_clips;
      solido::dsp::MelFilterbank fb = solido::dsp::MelFilterbank::make(
          cfg.n_mels, cfg.window_len, cfg.sample_rate, cfg.mel_fmin, cfg.effective_fmax());
      solido::Rng rng(cfg.seed);
      solido::Dataset d = solido::synth_dataset(n, cfg.clip_seconds, cfg.sample_rate, rng, fb,
                                                cfg.window_len, cfg.hop);
      std::filesystem::create_directories(synth_out);
      for (std::size_t i = 0; i < d.size(); ++i) {
        std::ostringstream name;
        name << synth_out << "/clip_" << std::setw(4) << std::setfill('0') << i << ".wav";
        solido::wav_write(name.str(), d.clips[i]);
      }
      info(g) << "wrote " << d.size() << " clips to " << synth_out << " (corpus hash "
              << std::hex << d.content_hash() << std::dec << ")\n";
      return kOk;
    }

    if (pre->parsed()) {
      solido::Dataset d = dataset_for(pre_data);
      solido::ModelBundle bundle = solido::ModelBundle::create(cfg);
      solido::Rng rng(cfg.seed + 1);
      solido::AdamW opt(cfg.lr);
      std::size_t L = bundle.clip_samples();
      double loss = 0.0;
      for (std::size_t step = 0; step < pre_steps; ++step) {
        std::size_t i = step % d.size();
        solido::Tensor s0 = solido::Tensor::from(
            {1, 1, L}, std::vector<double>(d.clips[i].samples.begin(), d.clips[i].samples.end()));
        solido::Tensor mel = bundle.vocoder.upsample_mel(d.mels[i], L);
        loss = solido::pretrain_step(s0, mel, bundle.sched, bundle.vocoder, rng, opt);
        if (!g.quiet && (step + 1) % 50 == 0)
          info(g) << "step " << step + 1 << " mse " << loss << "\n";
      }
      bundle.save(pre_out);
      info(g) << "saved base checkpoint " << pre_out << " (final mse " << loss << ")\n";
      return kOk;
    }

    if (fin->parsed()) {
      solido::Dataset d = dataset_for(fin_data);
      solido::ModelBundle bundle =
          fin_in.empty() ? solido::ModelBundle::create(cfg) : solido::ModelBundle::load(fin_in);
      if (!fin_in.empty()) cfg = bundle.cfg;
      solido::Rng rng(cfg.seed + 2);
      if (!bundle.adapters_attached) bundle.attach_adapters(rng);

      solido::FinetuneOptions opts;
      opts.max_steps = fin_steps ? fin_steps : cfg.max_steps;
      opts.target_clean_acc = fin_target;
      std::ofstream log_file;
      if (!fin_log.empty()) {
        log_file.open(fin_log);
        if (!log_file) throw solido::Error("finetune: cannot open log file " + fin_log);
        opts.log = &log_file;
      }
      solido::FinetuneResult res = solido::finetune(bundle, d, opts, rng);
      bundle.save(fin_out);
      info(g) << "ran " << res.steps_run << " steps; clean acc "
              << (res.final_clean_acc >= 0 ? std::to_string(res.final_clean_acc) : "n/a")
              << "; saved " << fin_out << "\n";
      return kOk;
    }

    if (gen->parsed()) {
      solido::ModelBundle bundle = solido::ModelBundle::load(gen_ckpt);
      solido::Rng rng(bundle.cfg.seed + 3);
      solido::WatermarkBits w =
          gen_bits == "random"
              ? solido::WatermarkBits::random(bundle.cfg.payload_bits, rng)
              : solido::WatermarkBits::from_hex(gen_bits, bundle.cfg.payload_bits);
      solido::dsp::Spectrogram mel;
      if (!gen_cond.empty()) {
        solido::dsp::AudioClip c = solido::wav_read(gen_cond);
        mel = solido::dsp::mel_spectrogram(c, bundle.fb, bundle.cfg.window_len, bundle.cfg.hop);
      } else {
        solido::Dataset d = dataset_for("");
        mel = d.mels[0];
      }
      solido::dsp::AudioClip clip = bundle.generate(w, mel, rng);
      solido::wav_write(gen_out, clip);
      info(g) << "payload " << w.to_hex() << " -> " << gen_out << "\n";
      return kOk;
    }

    if (atk->parsed()) {
      solido::dsp::AudioClip clip = solido::wav_read(atk_in);
      solido::dsp::AttackSpec spec = solido::dsp::parse_attack(atk_kind);
      spec.snr_db = atk_snr;
      spec.crop_rate = atk_rate;
      spec.level = atk_level;
      spec.cutoff_hz = atk_cutoff;
      spec.stretch_factor = atk_factor;
      spec.band_lo_hz = atk_lo;
      spec.band_hi_hz = atk_hi;
      solido::Rng rng(cfg.seed + 4);
      solido::dsp::AudioClip out = solido::dsp::apply_attack(clip, spec, rng);
      solido::wav_write(atk_out, out);
      info(g) << spec.name() << ": " << atk_in << " -> " << atk_out << "\n";
      return kOk;
    }

    if (ext->parsed()) {
      solido::ModelBundle bundle = solido::ModelBundle::load(ext_ckpt);
      solido::dsp::AudioClip clip = solido::wav_read(ext_in);
      solido::Tensor logits = bundle.dec.decode(clip);
      solido::WatermarkBits w = solido::logits_to_bits(logits);
      double conf = 0.0;
      for (double v : logits.data()) conf += 1.0 / (1.0 + std::exp(-std::abs(v)));
      conf /= static_cast<double>(logits.numel());
      std::cout << "bits " << w.to_hex() << "\n";
      std::cout << "confidence " << conf << "\n";
      return kOk;
    }

    if (ev->parsed()) {
      if (!ev_capacity.empty()) {
        std::vector<std::size_t> caps;
        std::stringstream ss(ev_capacity);
        std::string tok;
        while (std::getline(ss, tok, ',')) caps.push_back(std::stoul(tok));
        if (caps.empty()) throw solido::Error("evaluate: empty capacity list");
        solido::Dataset d = dataset_for(ev_data);
        solido::FinetuneOptions opts;
        opts.max_steps = cfg.max_steps;
        opts.target_clean_acc = 95.0;
        std::vector<solido::CapacityResult> rows = solido::capacity_sweep(cfg, d, caps, opts);
        std::string csv = solido::capacity_table_csv(rows);
        std::cout << csv;
        if (!ev_out.empty()) {
          std::ofstream os(ev_out);
          if (!os) throw solido::Error("evaluate: cannot open " + ev_out);
          os << csv;
        }
        return kOk;
      }
      solido::ModelBundle bundle = solido::ModelBundle::load(ev_ckpt);
      solido::Dataset d = dataset_for(ev_data);
      if (ev_clips < d.size()) {
        d.clips.resize(ev_clips);
        d.mels.resize(ev_clips);
      }
      solido::Rng rng(bundle.cfg.seed + 5);
      solido::RobustnessReport rep = solido::evaluate_robustness(
          bundle, d, solido::default_eval_attacks(bundle.cfg.sample_rate), rng);
      std::cout << rep.to_text();
      if (!ev_out.empty()) {
        std::ofstream os(ev_out);
        if (!os) throw solido::Error("evaluate: cannot open " + ev_out);
        os << rep.to_csv();
      }
      return kOk;
    }

    if (gc->parsed()) {
      bool ok = true;
      for (const solido::GradCheckCase& c : solido::gradient_check_suite(cfg.seed)) {
        if (!c.pass()) ok = false;
        info(g) << (c.pass() ? "pass" : "FAIL") << "  " << c.name << "  rel_err " << c.rel_err
                << " (tol " << c.tol << ")\n";
      }
      if (!ok) {
        std::cerr << "gradcheck: failures detected\n";
        return kNumericError;
      }
      info(g) << "gradcheck: all cases pass\n";
      return kOk;
    }

    if (ins->parsed()) {
      solido::Checkpoint ck = solido::Checkpoint::load(ins_in);
      std::cout << "SLDO v" << solido::Checkpoint::kVersion << ", " << ck.tensors.size()
                << " tensors\n";
      for (const auto& [name, entry] : ck.tensors) {
        std::size_t n = solido::shape_numel(entry.shape);
        std::cout << "  " << name << "  " << solido::shape_str(entry.shape) << "  f32 x " << n
                  << "\n";
      }
      if (!ck.config_json.empty()) std::cout << "config:\n" << ck.config_json << "\n";
      return kOk;
    }

    std::cerr << app.help();
    return kUsage;
  } catch (const solido::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumericError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
}
