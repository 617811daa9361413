#include "solido/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "solido/bundle.hpp"
#include "solido/codec.hpp"
#include "solido/diffusion.hpp"
#include "solido/lora.hpp"
#include "solido/ops.hpp"
#include "solido/training.hpp"

namespace solido {

namespace {

Tensor rand_tensor(const Shape& shape, Rng& rng, double scale_v = 1.0, double offset = 0.0) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = scale_v * rng.gaussian() + offset;
  return Tensor::from(shape, std::move(v), true);
}

struct Suite {
  std::vector<GradCheckCase> cases;
  Rng rng;

  explicit Suite(std::uint64_t seed) : rng(seed) {}

  void run(const std::string& name, Tensor& x, const std::function<Tensor(Tensor&)>& f,
           double tol = 1e-4, std::size_t max_coords = 0) {
    GradCheckCase c;
    c.name = name;
    c.tol = tol;
    c.rel_err = finite_difference_check(f, x, 1e-5, max_coords);
    cases.push_back(c);
  }
};

}  // namespace

std::vector<GradCheckCase> gradient_check_suite(std::uint64_t seed) {
  Suite s(seed);
  Rng& rng = s.rng;

  // ---- elementwise / arithmetic ----
  {
    Tensor a = rand_tensor({3, 4}, rng);
    Tensor b = rand_tensor({3, 4}, rng, 1.0, 0.3).detach();
    s.run("add", a, [&](Tensor& x) { return sum_all(add(x, b)); });
    s.run("sub", a, [&](Tensor& x) { return sum_all(sub(x, b)); });
    s.run("mul", a, [&](Tensor& x) { return mean_all(mul(x, b)); });
    s.run("scale", a, [&](Tensor& x) { return sum_all(scale(x, -1.7)); });
    Tensor b2 = rand_tensor({3, 4}, rng, 1.0, 0.2);
    s.run("mul.rhs", b2, [&](Tensor& x) { return mean_all(mul(a.detach(), x)); });
  }

  // ---- linear algebra ----
  {
    Tensor x = rand_tensor({2, 5}, rng);
    Tensor w = rand_tensor({3, 5}, rng);
    Tensor bias = rand_tensor({3}, rng);
    s.run("linear.x", x, [&](Tensor& v) { return sum_all(linear(v, w, bias)); });
    s.run("linear.w", w, [&](Tensor& v) { return sum_all(linear(x, v, bias)); });
    s.run("linear.bias", bias, [&](Tensor& v) { return sum_all(linear(x, w, v)); });
    Tensor ma = rand_tensor({3, 4}, rng);
    Tensor mb = rand_tensor({4, 2}, rng);
    s.run("matmul.a", ma, [&](Tensor& v) { return mean_all(matmul(v, mb)); });
    s.run("matmul.b", mb, [&](Tensor& v) { return mean_all(matmul(ma, v)); });
  }

  // ---- conv1d variants ----
  {
    struct Variant {
      const char* name;
      std::size_t cin, cout, k, L;
      ConvSpec spec;
    };
    const Variant variants[] = {
        {"conv1d.plain", 3, 4, 3, 11, {1, 1, 1, 1}},
        {"conv1d.strided", 2, 2, 3, 12, {2, 1, 1, 1}},
        {"conv1d.dilated", 2, 3, 3, 14, {1, 2, 2, 1}},
        {"conv1d.grouped", 4, 4, 3, 10, {1, 1, 1, 4}},
    };
    for (const auto& v : variants) {
      Tensor x = rand_tensor({2, v.cin, v.L}, rng);
      Tensor w = rand_tensor({v.cout, v.cin / v.spec.groups, v.k}, rng);
      Tensor bias = rand_tensor({v.cout}, rng);
      s.run(std::string(v.name) + ".x", x,
            [&](Tensor& t) { return sum_all(conv1d(t, w, bias, v.spec)); });
      s.run(std::string(v.name) + ".w", w,
            [&](Tensor& t) { return sum_all(conv1d(x, t, bias, v.spec)); });
      s.run(std::string(v.name) + ".b", bias,
            [&](Tensor& t) { return sum_all(conv1d(x, w, t, v.spec)); });
    }
  }

  // ---- activations (inputs kept away from the relu kink) ----
  {
    Tensor x = rand_tensor({4, 6}, rng, 1.0, 0.0);
    for (double& v : x.mut_data())
      if (std::abs(v) < 0.05) v = v < 0 ? -0.05 : 0.05;
    s.run("relu", x, [&](Tensor& t) { return sum_all(relu(t)); });
    s.run("sigmoid", x, [&](Tensor& t) { return sum_all(sigmoid(t)); });
    s.run("tanh", x, [&](Tensor& t) { return sum_all(tanh_op(t)); });
    Tensor xp = rand_tensor({3, 3}, rng, 0.3, 2.0);
    s.run("log", xp, [&](Tensor& t) { return sum_all(log_op(t)); });
  }

  // ---- reductions / losses ----
  {
    Tensor x = rand_tensor({2, 3, 5}, rng);
    s.run("reduce_mean.time", x, [&](Tensor& t) { return sum_all(reduce_mean(t, {2})); });
    s.run("reduce_mean.multi", x, [&](Tensor& t) { return sum_all(reduce_mean(t, {0, 2})); });
    s.run("mean_all", x, [&](Tensor& t) { return mean_all(t); });
    s.run("sum_all", x, [&](Tensor& t) { return scale(sum_all(t), 0.25); });
    Tensor a = rand_tensor({3, 4}, rng);
    Tensor b = rand_tensor({3, 4}, rng, 1.0, 2.0).detach();  // offset avoids ties
    s.run("l1_distance", a, [&](Tensor& t) { return l1_distance(t, b); });
    Tensor logits = rand_tensor({2, 8}, rng);
    std::vector<double> tv(16);
    for (double& t : tv) t = static_cast<double>(rng.uniform_int(2));
    Tensor targets = Tensor::from({2, 8}, std::move(tv));
    s.run("bce_with_logits", logits,
          [&](Tensor& t) { return bce_with_logits(t, targets); });
  }

  // ---- structural ----
  {
    Tensor x = rand_tensor({2, 3, 8}, rng);
    s.run("reshape", x, [&](Tensor& t) { return sum_all(mul(reshape(t, {6, 8}), reshape(t, {6, 8}))); });
    s.run("slice_last", x, [&](Tensor& t) { return sum_all(slice_last(t, 2, 5)); });
    s.run("slice_channels", x, [&](Tensor& t) { return sum_all(slice_channels(t, 1, 3)); });
    Tensor bias = rand_tensor({3}, rng);
    s.run("channel_bias_add.x", x,
          [&](Tensor& t) { return sum_all(channel_bias_add(t, bias)); });
    s.run("channel_bias_add.b", bias,
          [&](Tensor& t) { return sum_all(channel_bias_add(x, t)); });
    Tensor other = rand_tensor({1, 3, 8}, rng).detach();
    s.run("concat_batch", x,
          [&](Tensor& t) { return sum_all(concat_batch({t, other})); });
  }

  // ---- attack ops ----
  {
    Tensor x = rand_tensor({1, 1, 16}, rng);
    s.run("delay_add", x, [&](Tensor& t) { return sum_all(delay_add(t, 3, 0.4)); });
    // dither_quantize is piecewise constant; its declared gradient is the
    // straight-through identity, checked analytically rather than by FD.
    {
      std::vector<double> noise(16, 0.0);
      Tensor y = rand_tensor({1, 1, 16}, rng, 0.1);
      Tensor q = dither_quantize(y, noise, dsp::kDitherLsb);
      sum_all(q).backward();
      double worst = 0.0;
      for (double g : y.grad()) worst = std::max(worst, std::abs(g - 1.0));
      s.cases.push_back({"dither_quantize.straight_through", worst, 1e-12});
    }
  }

  // ---- spectrogram ops ----
  {
    Tensor x = rand_tensor({48}, rng, 0.3);
    s.run("stft_power", x,
          [&](Tensor& t) { return sum_all(stft_power(t, 16, 8)); }, 1e-4);
    s.run("stft_log_magnitude", x,
          [&](Tensor& t) { return sum_all(stft_log_magnitude(t, 16, 8)); }, 1e-4);
    dsp::MelFilterbank fb = dsp::MelFilterbank::make(4, 16, 8000.0, 40.0, 4000.0);
    s.run("mel_compress", x,
          [&](Tensor& t) { return sum_all(mel_compress(stft_power(t, 16, 8), fb)); }, 1e-4);
  }

  // ---- composite graphs ----
  RunConfig toy;
  toy.sample_rate = 800.0;
  toy.clip_seconds = 0.16;  // L = 128: the decoder's seven stride-2 layers fit
  toy.window_len = 32;
  toy.hop = 16;
  toy.n_mels = 4;
  toy.diffusion_steps = 3;
  toy.channels = 6;
  toy.dilations = {1, 2};
  toy.step_embed_dim = 8;
  toy.payload_bits = 8;
  toy.ext_hidden = 16;
  toy.seed = seed + 17;
  ModelBundle bundle = ModelBundle::create(toy);
  std::size_t L = toy.clip_samples();

  dsp::AudioClip cond_clip;
  cond_clip.sample_rate = toy.sample_rate;
  cond_clip.samples.resize(L);
  for (double& v : cond_clip.samples) v = 0.3 * rng.gaussian();
  dsp::Spectrogram mel = dsp::mel_spectrogram(cond_clip, bundle.fb, toy.window_len, toy.hop);
  Tensor mel_up = bundle.vocoder.upsample_mel(mel, L);
  WatermarkBits w = WatermarkBits::random(toy.payload_bits, rng);
  Tensor targets = reshape(w.to_tensor(), {1, toy.payload_bits});

  // 1: the full watermarking chain as a function of the input noise s_T.
  {
    Tensor s_T = rand_tensor({1, 1, L}, rng);
    auto chain = [&](Tensor& t) {
      Rng step_rng(seed + 31);  // fresh but fixed z draws per evaluation
      Tensor sigma = bundle.enc.encode(w);
      Tensor s0 = sample(inject(sigma, t), mel_up, bundle.sched, bundle.vocoder, step_rng);
      return bce_with_logits(bundle.dec.forward(s0), targets);
    };
    s.run("composite.encode_sample_decode", s_T, chain, 1e-3, 24);
  }

  // 2: the perceptual losses through the fused spectrogram ops.
  {
    Tensor x = rand_tensor({static_cast<std::size_t>(L)}, rng, 0.2);
    Tensor ref = rand_tensor({static_cast<std::size_t>(L)}, rng, 0.2).detach();
    auto losses = [&](Tensor& t) {
      Tensor lm = loss_mel(ref, t, bundle.fb, toy.window_len, toy.hop);
      Tensor ls = loss_stft(ref, t, toy.window_len, toy.hop);
      return add(scale(lm, 0.5), scale(ls, 0.5));
    };
    s.run("composite.spectral_losses", x, losses, 1e-3, 24);
  }

  // 3: gradients reach a LoRA adapter through attack + decoder.
  {
    Rng lrng(seed + 47);
    bundle.attach_adapters(lrng);
    Conv1dLayer& target = *bundle.vocoder.final_five_convs().back();
    // B starts at zero, which would make a check against A degenerate (both
    // gradients vanish); the gradient through B is nonzero from step one.
    Tensor b_mat = target.adapter->B.tensor;
    Tensor s_T_fixed = rand_tensor({1, 1, L}, rng).detach();
    auto adapted = [&](Tensor&) {
      Rng step_rng(seed + 59);
      Tensor sigma = bundle.enc.encode(w);
      Tensor s0 = sample(inject(sigma, s_T_fixed), mel_up, bundle.sched, bundle.vocoder, step_rng);
      Tensor attacked = delay_add(s0, 5, 0.4);
      return bce_with_logits(bundle.dec.forward(attacked), targets);
    };
    s.run("composite.lora_attack_decode", b_mat, adapted, 1e-3, 16);
  }

  return s.cases;
}

void assert_gradients_ok(std::uint64_t seed) {
  for (const GradCheckCase& c : gradient_check_suite(seed))
    if (!c.pass())
      throw NumericError("gradient check failed: " + c.name + " rel_err " +
                         std::to_string(c.rel_err) + " >= tol " + std::to_string(c.tol));
}

}  // namespace solido
