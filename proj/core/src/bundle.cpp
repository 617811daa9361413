#include "solido/bundle.hpp"

#include "solido/checkpoint.hpp"

namespace solido {

namespace {
DenoiserConfig denoiser_config(const RunConfig& cfg) {
  return DenoiserConfig{
      .channels = cfg.channels,
      .dilations = cfg.dilations,
      .step_embed_dim = cfg.step_embed_dim,
      .n_mels = cfg.n_mels,
  };
}
}  // namespace

ModelBundle ModelBundle::create(const RunConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  ModelBundle b{
      .cfg = cfg,
      .sched = NoiseSchedule::linear(cfg.diffusion_steps, cfg.beta_start, cfg.beta_end),
      .fb = dsp::MelFilterbank::make(cfg.n_mels, cfg.window_len, cfg.sample_rate, cfg.mel_fmin,
                                     cfg.effective_fmax()),
      .vocoder = DenoiserNetwork(denoiser_config(cfg), rng),
      .enc = EncoderNet(cfg.payload_bits, cfg.clip_samples(), rng),
      .dec = DecoderNet(cfg.payload_bits, rng, cfg.ext_hidden),
  };
  return b;
}

void ModelBundle::attach_adapters(Rng& rng) {
  require(!adapters_attached, "attach_adapters: bundle already adapted");
  vocoder.set_trainable(false);
  for (Conv1dLayer* layer : vocoder.final_five_convs())
    attach_adapter(*layer, cfg.lora_rank, cfg.lora_alpha, rng, cfg.lora_bare_alpha);
  adapters_attached = true;
}

void ModelBundle::merge_adapters() {
  for (Conv1dLayer* layer : vocoder.final_five_convs()) merge_adapter(*layer);
  adapters_attached = false;
}

std::vector<Parameter*> ModelBundle::all_parameters() {
  std::vector<Parameter*> out = vocoder.parameters();
  for (Parameter* p : enc.parameters()) out.push_back(p);
  for (Parameter* p : dec.parameters()) out.push_back(p);
  return out;
}

std::vector<Parameter*> ModelBundle::sdft_trainables() {
  std::vector<Parameter*> out;
  for (Parameter* p : all_parameters())
    if (p->trainable) out.push_back(p);
  return out;
}

std::vector<Parameter*> ModelBundle::vocoder_base() {
  std::vector<Parameter*> out;
  for (Parameter* p : vocoder.parameters())
    if (p->name.rfind("vocoder.", 0) == 0) out.push_back(p);
  return out;
}

Tensor ModelBundle::generate_tensor(const WatermarkBits& w, const dsp::Spectrogram& mel,
                                    Rng& rng) const {
  std::size_t L = cfg.clip_samples();
  std::vector<double> noise(L);
  for (double& v : noise) v = rng.gaussian();
  Tensor s_T = Tensor::from({1, 1, L}, std::move(noise));
  Tensor sigma = enc.encode(w);
  Tensor x_T = inject(sigma, s_T);
  Tensor mel_up = vocoder.upsample_mel(mel, L);
  return sample(x_T, mel_up, sched, vocoder, rng);
}

dsp::AudioClip ModelBundle::clip_from_tensor(const Tensor& x) const {
  dsp::AudioClip clip;
  clip.sample_rate = cfg.sample_rate;
  clip.samples.assign(x.data().begin(), x.data().end());
  return clip;
}

dsp::AudioClip ModelBundle::generate(const WatermarkBits& w, const dsp::Spectrogram& mel,
                                     Rng& rng) const {
  return clip_from_tensor(generate_tensor(w, mel, rng));
}

dsp::AudioClip ModelBundle::generate_clean(const dsp::Spectrogram& mel, Rng& rng) const {
  std::size_t L = cfg.clip_samples();
  std::vector<double> noise(L);
  for (double& v : noise) v = rng.gaussian();
  Tensor s_T = Tensor::from({1, 1, L}, std::move(noise));
  Tensor mel_up = vocoder.upsample_mel(mel, L);
  return clip_from_tensor(sample(s_T, mel_up, sched, vocoder, rng));
}

WatermarkBits ModelBundle::extract(const dsp::AudioClip& clip) const {
  return logits_to_bits(dec.decode(clip));
}

void ModelBundle::save(const std::string& path) const {
  Checkpoint ck;
  ck.config_json = cfg.to_json_text();
  ModelBundle& self = const_cast<ModelBundle&>(*this);
  ck.store(self.all_parameters());
  ck.save(path);
}

ModelBundle ModelBundle::load(const std::string& path) {
  Checkpoint ck = Checkpoint::load(path);
  RunConfig cfg = RunConfig::from_json_text(ck.config_json);
  ModelBundle b = ModelBundle::create(cfg);
  // Adapter tensors are present iff the checkpoint was written after SDFT.
  bool has_adapters = false;
  for (const auto& [name, e] : ck.tensors)
    if (name.rfind("lora.", 0) == 0) {
      has_adapters = true;
      break;
    }
  if (has_adapters) {
    Rng rng(cfg.seed);
    b.attach_adapters(rng);  // values are overwritten by restore below
  }
  ck.restore(b.all_parameters());
  return b;
}

}  // namespace solido
