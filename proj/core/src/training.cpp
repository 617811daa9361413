#include "solido/training.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "solido/eval.hpp"

namespace solido {

std::string LossReport::to_json_line() const {
  std::ostringstream os;
  os.precision(12);
  os << "{\"step\":" << step << ",\"l_m\":" << l_m << ",\"l_s\":" << l_s << ",\"l_sq\":" << l_sq
     << ",\"l_wea\":" << l_wea << ",\"l_total\":" << l_total << ",\"lambda_m\":" << lambda_m
     << ",\"lambda_s\":" << lambda_s << ",\"lambda_wea\":" << lambda_wea << "}";
  return os.str();
}

void update_lambda_schedule(LambdaState& state, double l_wea, RunConfig& cfg) {
  if (state.ema_wea < 0.0)
    state.ema_wea = l_wea;
  else
    state.ema_wea = LambdaState::kEmaDecay * state.ema_wea + (1.0 - LambdaState::kEmaDecay) * l_wea;
  if (state.switched) return;  // one-way
  if (state.ema_wea < cfg.wea_threshold) {
    state.switched = true;
    cfg.lambda_wea = 0.1;
    cfg.lambda_m = 0.5;
    cfg.lambda_s = 0.5;
  }
}

Tensor attack_tensor(const Tensor& x, const dsp::AttackSpec& spec, double sample_rate, Rng& rng) {
  require(x.shape().size() == 3 && x.shape()[0] == 1 && x.shape()[1] == 1,
          "attack_tensor: expects [1,1,L]");
  std::size_t L = x.shape()[2];
  switch (spec.kind) {
    case dsp::AttackKind::kNone:
      return x;
    case dsp::AttackKind::kGaussianNoise: {
      double p_sig = 0.0;
      for (double v : x.data()) p_sig += v * v;
      p_sig /= static_cast<double>(L);
      require(p_sig > 0.0, "attack_tensor: silent input has no defined SNR");
      double std_dev = std::sqrt(p_sig / std::pow(10.0, spec.snr_db / 10.0));
      std::vector<double> noise(L);
      for (double& v : noise) v = std_dev * rng.gaussian();
      return add(x, Tensor::from(x.shape(), std::move(noise)));
    }
    case dsp::AttackKind::kEcho: {
      std::size_t d = static_cast<std::size_t>(std::llround(spec.delay_ms * sample_rate / 1000.0));
      require(d < L, "attack_tensor: echo delay reaches past the clip");
      return delay_add(x, d, spec.attenuation);
    }
    case dsp::AttackKind::kRearCrop: {
      require(spec.crop_rate > 0.0 && spec.crop_rate < 1.0, "attack_tensor: crop rate out of range");
      std::size_t cut = static_cast<std::size_t>(std::floor(spec.crop_rate * static_cast<double>(L)));
      std::size_t front = spec.crop_symmetric ? cut / 2 : 0;
      return slice_last(x, front, L - cut);
    }
    case dsp::AttackKind::kDither: {
      std::vector<double> noise(L);
      for (double& v : noise)
        v = (spec.pdf == dsp::DitherPdf::kRpdf)
                ? rng.uniform(-dsp::kDitherLsb / 2.0, dsp::kDitherLsb / 2.0)
                : rng.uniform(-dsp::kDitherLsb / 2.0, dsp::kDitherLsb / 2.0) +
                      rng.uniform(-dsp::kDitherLsb / 2.0, dsp::kDitherLsb / 2.0);
      return dither_quantize(x, noise, dsp::kDitherLsb);
    }
    default:
      throw Error("attack_tensor: no differentiable form for attack '" + spec.name() + "'");
  }
}

Tensor loss_mel(const Tensor& s0, const Tensor& s_hat0, const dsp::MelFilterbank& fb,
                std::size_t window_len, std::size_t hop) {
  require(s0.shape() == s_hat0.shape(), "loss_mel: length mismatch");
  Tensor ma = mel_compress(stft_power(s0, window_len, hop), fb);
  Tensor mb = mel_compress(stft_power(s_hat0, window_len, hop), fb);
  return l1_distance(ma, mb);
}

Tensor loss_stft(const Tensor& s0, const Tensor& s_hat0, std::size_t window_len, std::size_t hop) {
  require(s0.shape() == s_hat0.shape(), "loss_stft: length mismatch");
  Tensor la = stft_log_magnitude(s0, window_len, hop);
  Tensor lb = stft_log_magnitude(s_hat0, window_len, hop);
  return l1_distance(la, lb);
}

Tensor loss_wea(const Tensor& logits, const WatermarkBits& w) {
  Tensor targets = reshape(w.to_tensor(), logits.shape());
  return bce_with_logits(logits, targets);
}

LossReport sdft_step(ModelBundle& bundle, const Dataset& data,
                     const std::vector<std::size_t>& batch_indices, Rng& rng, AdamW& opt,
                     LambdaState& lambda_state, std::size_t step) {
  require(bundle.adapters_attached, "sdft_step: attach adapters before fine-tuning");
  require(!batch_indices.empty(), "sdft_step: empty batch");
  const RunConfig& cfg = bundle.cfg;
  std::size_t L = bundle.clip_samples();
  double inv_b = 1.0 / static_cast<double>(batch_indices.size());

  std::vector<Parameter*> trainables = bundle.sdft_trainables();

  LossReport rep;
  rep.step = step;
  rep.lambda_m = cfg.lambda_m;
  rep.lambda_s = cfg.lambda_s;
  rep.lambda_wea = cfg.lambda_wea;

  for (std::size_t idx : batch_indices) {
    require(idx < data.size(), "sdft_step: batch index out of range");
    const dsp::AudioClip& s0 = data.clips[idx];
    const dsp::Spectrogram& mel = data.mels[idx];
    require(s0.length() == L, "sdft_step: dataset clip length differs from config geometry");

    WatermarkBits w = WatermarkBits::random(cfg.payload_bits, rng);

    // Watermarking + generating: sigma + s_T through the adapted reverse chain.
    std::vector<double> noise(L);
    for (double& v : noise) v = rng.gaussian();
    Tensor s_T = Tensor::from({1, 1, L}, std::move(noise));
    Tensor sigma = bundle.enc.encode(w);
    Tensor x_T = inject(sigma, s_T);
    Tensor mel_up = bundle.vocoder.upsample_mel(mel, L);
    Tensor s_hat0 = sample(x_T, mel_up, bundle.sched, bundle.vocoder, rng);

    // Extracting through the attack simulator.
    dsp::AttackSpec spec;
    if (cfg.train_attacks && step > cfg.attack_warmup_steps &&
        rng.uniform() >= cfg.clean_mix) {
      spec = dsp::draw_training_attack(rng);
      spec.crop_symmetric = cfg.crop_symmetric;
    }
    Tensor attacked = attack_tensor(s_hat0, spec, cfg.sample_rate, rng);
    Tensor logits = bundle.dec.forward(attacked);
    Tensor wea = loss_wea(logits, w);

    Tensor item_loss = scale(wea, cfg.lambda_wea * inv_b);
    double lm_val = 0.0, ls_val = 0.0;
    if (cfg.lambda_m > 0.0 || cfg.lambda_s > 0.0) {
      Tensor ref = Tensor::from({L}, std::vector<double>(s0.samples.begin(), s0.samples.end()));
      Tensor gen = reshape(s_hat0, {L});
      if (cfg.lambda_m > 0.0) {
        Tensor lm = loss_mel(ref, gen, bundle.fb, cfg.window_len, cfg.hop);
        lm_val = lm.item();
        item_loss = add(item_loss, scale(lm, cfg.lambda_m * inv_b));
      }
      if (cfg.lambda_s > 0.0) {
        Tensor ls = loss_stft(ref, gen, cfg.window_len, cfg.hop);
        ls_val = ls.item();
        item_loss = add(item_loss, scale(ls, cfg.lambda_s * inv_b));
      }
    }

    double wea_val = wea.item();
    if (!(std::isfinite(wea_val) && std::isfinite(lm_val) && std::isfinite(ls_val)))
      throw NumericError("sdft_step: loss diverged to NaN/Inf at step " + std::to_string(step) +
                         " (item " + std::to_string(idx) + "); aborting");

    rep.l_wea += wea_val * inv_b;
    rep.l_m += lm_val * inv_b;
    rep.l_s += ls_val * inv_b;

    item_loss.backward();  // accumulates into trainable grads across items
  }

  rep.l_sq = cfg.lambda_m * rep.l_m + cfg.lambda_s * rep.l_s;
  rep.l_total = rep.l_sq + cfg.lambda_wea * rep.l_wea;

  std::vector<Parameter*> with_grad;
  for (Parameter* p : trainables)
    if (p->tensor.has_grad()) with_grad.push_back(p);
  opt.step(with_grad);
  AdamW::zero_grads(trainables);

  update_lambda_schedule(lambda_state, rep.l_wea, bundle.cfg);
  return rep;
}

FinetuneResult finetune(ModelBundle& bundle, const Dataset& data, const FinetuneOptions& opts,
                        Rng& rng) {
  require(data.size() >= 1, "finetune: empty dataset");
  // beta2 = 0.99: fresh payloads every item make the gradient noisy, and the
  // shorter second-moment horizon adapts noticeably faster at lr 2e-4.
  AdamW opt(bundle.cfg.lr, 0.9, 0.99);
  LambdaState lambda_state;
  FinetuneResult res;

  // An evaluation probe must not perturb the training stream, or early stopping
  // would change the trajectory; give it its own deterministic generator.
  auto probe_acc = [&](std::size_t step) {
    Rng probe_rng(bundle.cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    double total = 0.0;
    for (std::size_t i = 0; i < opts.eval_payloads; ++i) {
      const auto& mel = data.mels[i % data.size()];
      WatermarkBits w = WatermarkBits::random(bundle.cfg.payload_bits, probe_rng);
      dsp::AudioClip clip = bundle.generate(w, mel, probe_rng);
      total += bit_accuracy(bundle.extract(clip), w);
    }
    (void)step;
    return total / static_cast<double>(opts.eval_payloads);
  };

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::size_t step = 0;
  bool stop = false;
  while (!stop && step < opts.max_steps) {
    // Fisher-Yates reshuffle per epoch.
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_int(i)]);
    for (std::size_t pos = 0; pos < order.size() && !stop && step < opts.max_steps;
         pos += bundle.cfg.batch) {
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                     order.begin() + static_cast<std::ptrdiff_t>(
                                                         std::min(pos + bundle.cfg.batch, order.size())));
      ++step;
      res.last_report = sdft_step(bundle, data, batch, rng, opt, lambda_state, step);
      if (opts.log) (*opts.log) << res.last_report.to_json_line() << std::endl;

      if (opts.eval_every > 0 && step % opts.eval_every == 0 && opts.target_clean_acc >= 0.0) {
        res.final_clean_acc = probe_acc(step);
        if (opts.log)
          (*opts.log) << "{\"step\":" << step << ",\"probe_clean_acc\":" << res.final_clean_acc
                      << "}" << std::endl;
        if (res.final_clean_acc >= opts.target_clean_acc) stop = true;
      }
    }
  }
  res.steps_run = step;
  if (res.final_clean_acc < 0.0 && opts.eval_every > 0) res.final_clean_acc = probe_acc(step);
  return res;
}

}  // namespace solido
