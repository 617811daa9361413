#include <benchmark/benchmark.h>

#include <vector>

#include "solido/diffusion.hpp"
#include "solido/dsp.hpp"
#include "solido/layers.hpp"
#include "solido/ops.hpp"
#include "solido/rng.hpp"

namespace {

using namespace solido;

Tensor random_signal(std::size_t length, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(length);
  for (double& s : v) s = 0.3 * rng.gaussian();
  return Tensor::from({1, 1, length}, std::move(v));
}

void BM_Conv1dForward(benchmark::State& state) {
  const std::size_t channels = static_cast<std::size_t>(state.range(0));
  const std::size_t length = 4000;
  Rng rng(7);
  Conv1dLayer conv =
      Conv1dLayer::make("bench.conv", channels, channels, 3, {.padding = 1}, rng);
  Rng data_rng(11);
  std::vector<double> v(channels * length);
  for (double& s : v) s = data_rng.gaussian();
  Tensor x = Tensor::from({1, channels, length}, std::move(v));
  for (auto _ : state) {
    Tensor y = conv.forward(x);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(channels * channels * 3 * length));
}
BENCHMARK(BM_Conv1dForward)->Arg(8)->Arg(16)->Arg(32);

void BM_DenoiserForward(benchmark::State& state) {
  DenoiserConfig dcfg;
  dcfg.channels = static_cast<std::size_t>(state.range(0));
  dcfg.dilations = {1, 2, 4, 8};
  dcfg.step_embed_dim = 64;
  dcfg.n_mels = 24;
  Rng rng(13);
  DenoiserNetwork net(dcfg, rng);

  const std::size_t length = 4000;
  Tensor x = random_signal(length, 17);
  dsp::AudioClip clip;
  clip.sample_rate = 8000.0;
  clip.samples.assign(length, 0.0);
  Rng crng(19);
  for (double& s : clip.samples) s = 0.3 * crng.gaussian();
  dsp::MelFilterbank fb = dsp::MelFilterbank::make(dcfg.n_mels, 256, 8000.0, 0.0, 4000.0);
  dsp::Spectrogram mel = dsp::mel_spectrogram(clip, fb, 256, 128);
  Tensor mel_up = net.upsample_mel(mel, length);

  for (auto _ : state) {
    Tensor eps = net.forward(x, 1, mel_up);
    benchmark::DoNotOptimize(eps.data());
  }
}
BENCHMARK(BM_DenoiserForward)->Arg(8)->Arg(16)->Arg(32);

void BM_StftLogMagnitude(benchmark::State& state) {
  const std::size_t length = static_cast<std::size_t>(state.range(0));
  Rng rng(23);
  std::vector<double> v(length);
  for (double& s : v) s = 0.3 * rng.gaussian();
  Tensor x = Tensor::from({length}, std::move(v));
  for (auto _ : state) {
    Tensor sp = stft_log_magnitude(x, 256, 128);
    benchmark::DoNotOptimize(sp.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(length));
}
BENCHMARK(BM_StftLogMagnitude)->Arg(4000)->Arg(16000);

}  // namespace

BENCHMARK_MAIN();
