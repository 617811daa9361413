#include "solido/config.hpp"

#include <fstream>
#include <set>

#include "json.hpp"

namespace solido {

using nlohmann::json;

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "sample_rate", "clip_seconds", "dataset_clips",
      "window_len", "hop", "n_mels", "mel_fmin", "mel_fmax",
      "diffusion_steps", "beta_start", "beta_end", "channels", "dilations", "step_embed_dim",
      "payload_bits", "ext_hidden",
      "lora_rank", "lora_alpha", "lora_bare_alpha",
      "lambda_m", "lambda_s", "lambda_wea", "wea_threshold", "lr", "batch", "epochs", "max_steps",
      "train_attacks", "attack_warmup_steps", "clean_mix", "crop_symmetric", "seed",
  };
  return keys;
}

json to_json(const RunConfig& c) {
  json j;
  j["sample_rate"] = c.sample_rate;
  j["clip_seconds"] = c.clip_seconds;
  j["dataset_clips"] = c.dataset_clips;
  j["window_len"] = c.window_len;
  j["hop"] = c.hop;
  j["n_mels"] = c.n_mels;
  j["mel_fmin"] = c.mel_fmin;
  j["mel_fmax"] = c.mel_fmax;
  j["diffusion_steps"] = c.diffusion_steps;
  j["beta_start"] = c.beta_start;
  j["beta_end"] = c.beta_end;
  j["channels"] = c.channels;
  j["dilations"] = c.dilations;
  j["step_embed_dim"] = c.step_embed_dim;
  j["payload_bits"] = c.payload_bits;
  j["ext_hidden"] = c.ext_hidden;
  j["lora_rank"] = c.lora_rank;
  j["lora_alpha"] = c.lora_alpha;
  j["lora_bare_alpha"] = c.lora_bare_alpha;
  j["lambda_m"] = c.lambda_m;
  j["lambda_s"] = c.lambda_s;
  j["lambda_wea"] = c.lambda_wea;
  j["wea_threshold"] = c.wea_threshold;
  j["lr"] = c.lr;
  j["batch"] = c.batch;
  j["epochs"] = c.epochs;
  j["max_steps"] = c.max_steps;
  j["train_attacks"] = c.train_attacks;
  j["attack_warmup_steps"] = c.attack_warmup_steps;
  j["clean_mix"] = c.clean_mix;
  j["crop_symmetric"] = c.crop_symmetric;
  j["seed"] = c.seed;
  return j;
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("config: JSON parse failure: ") + e.what());
  }
  for (auto it = j.begin(); it != j.end(); ++it)
    require(known_keys().count(it.key()) > 0, "config: unknown key '" + it.key() + "'");

  RunConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("sample_rate", c.sample_rate);
  get("clip_seconds", c.clip_seconds);
  get("dataset_clips", c.dataset_clips);
  get("window_len", c.window_len);
  get("hop", c.hop);
  get("n_mels", c.n_mels);
  get("mel_fmin", c.mel_fmin);
  get("mel_fmax", c.mel_fmax);
  get("diffusion_steps", c.diffusion_steps);
  get("beta_start", c.beta_start);
  get("beta_end", c.beta_end);
  get("channels", c.channels);
  get("dilations", c.dilations);
  get("step_embed_dim", c.step_embed_dim);
  get("payload_bits", c.payload_bits);
  get("ext_hidden", c.ext_hidden);
  get("lora_rank", c.lora_rank);
  get("lora_alpha", c.lora_alpha);
  get("lora_bare_alpha", c.lora_bare_alpha);
  get("lambda_m", c.lambda_m);
  get("lambda_s", c.lambda_s);
  get("lambda_wea", c.lambda_wea);
  get("wea_threshold", c.wea_threshold);
  get("lr", c.lr);
  get("batch", c.batch);
  get("epochs", c.epochs);
  get("max_steps", c.max_steps);
  get("train_attacks", c.train_attacks);
  get("attack_warmup_steps", c.attack_warmup_steps);
  get("clean_mix", c.clean_mix);
  get("crop_symmetric", c.crop_symmetric);
  get("seed", c.seed);
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_text(text);
}

std::string RunConfig::to_json_text() const { return to_json(*this).dump(2); }

void RunConfig::save(const std::string& path) const {
  std::ofstream out(path);
  require(out.good(), "config: cannot write " + path);
  out << to_json_text() << "\n";
}

void RunConfig::validate() const {
  require(sample_rate > 0.0, "config: sample_rate must be positive");
  require(clip_seconds > 0.0, "config: clip_seconds must be positive");
  require(hop > 0 && window_len > 0, "config: window/hop must be positive");
  require(diffusion_steps >= 2, "config: diffusion_steps must be >= 2");
  require(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0, "config: bad beta range");
  require(payload_bits >= 1, "config: payload_bits must be >= 1");
  require(lora_rank >= 1, "config: lora_rank must be >= 1");
  require(lambda_m >= 0.0 && lambda_s >= 0.0 && lambda_wea >= 0.0, "config: loss weights must be >= 0");
  require(lr > 0.0, "config: lr must be positive");
  require(batch >= 1, "config: batch must be >= 1");
  require(clean_mix >= 0.0 && clean_mix <= 1.0, "config: clean_mix must be in [0, 1]");
  require(!dilations.empty(), "config: at least one residual block required");
  require(channels >= 1 && step_embed_dim >= 2 && step_embed_dim % 2 == 0,
          "config: bad network widths");
}

}  // namespace solido
