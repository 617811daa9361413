#include "solido/lora.hpp"

#include "solido/layers.hpp"

namespace solido {

LoraAdapter LoraAdapter::make(const std::string& layer_name, std::size_t d_out, std::size_t d_in,
                              std::size_t rank, double alpha, Rng& rng, bool bare_alpha,
                              double init_std) {
  require(rank >= 1, "LoraAdapter: rank must be >= 1");
  LoraAdapter a;
  a.rank = rank;
  a.alpha = alpha;
  a.bare_alpha = bare_alpha;
  std::vector<double> a_data(rank * d_in);
  for (double& v : a_data) v = init_std * rng.gaussian();
  a.A = Parameter("lora." + layer_name + ".A", Tensor::from({rank, d_in}, std::move(a_data)), true);
  a.B = Parameter("lora." + layer_name + ".B", Tensor::zeros({d_out, rank}), true);
  return a;
}

namespace {

template <typename Layer>
void attach_impl(Layer& layer, std::size_t rank, double alpha, Rng& rng, bool bare_alpha) {
  require(!layer.adapter.has_value(), "attach_adapter: layer '" + layer.name + "' already has an adapter");
  layer.adapter = LoraAdapter::make(layer.name, layer.d_out(), layer.d_in(), rank, alpha, rng, bare_alpha);
  layer.w.set_trainable(false);
  layer.b.set_trainable(false);
}

template <typename Layer>
void merge_impl(Layer& layer) {
  if (!layer.adapter) return;
  Tensor delta = layer.adapter->delta();
  auto wd = layer.w.tensor.mut_data();
  auto dd = delta.data();
  for (std::size_t i = 0; i < wd.size(); ++i) wd[i] += dd[i];
  layer.adapter.reset();
}

}  // namespace

void attach_adapter(Conv1dLayer& layer, std::size_t rank, double alpha, Rng& rng, bool bare_alpha) {
  attach_impl(layer, rank, alpha, rng, bare_alpha);
}
void attach_adapter(LinearLayer& layer, std::size_t rank, double alpha, Rng& rng, bool bare_alpha) {
  attach_impl(layer, rank, alpha, rng, bare_alpha);
}
void merge_adapter(Conv1dLayer& layer) { merge_impl(layer); }
void merge_adapter(LinearLayer& layer) { merge_impl(layer); }

}  // namespace solido
