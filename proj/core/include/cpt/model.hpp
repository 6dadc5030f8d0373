#pragma once

#include "cpt/autodiff.hpp"
#include "cpt/cost_model.hpp"
#include "cpt/quantize.hpp"
#include "cpt/rng.hpp"
#include "cpt/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cpt {

// One layer of a sequential network, parseable from a compact token:
//   conv:<in>:<out>:<k>[:<stride>[:<pad>]]
//   linear:<in>:<out>
//   relu
//   avgpool:<k>
//   flatten
struct LayerSpec {
  enum class Kind { conv, linear, relu, avgpool, flatten };
  Kind kind = Kind::relu;
  int in = 0;
  int out = 0;
  int k = 0;
  int stride = 1;
  int pad = 0;

  static LayerSpec parse(const std::string& token);
  std::string to_string() const;
};

std::vector<LayerSpec> parse_layer_list(const std::string& comma_separated);

// Named architectures. Presets validate the input shape they require:
//   cnn6         3 conv blocks + 2 fc, wants [1, 16, 16], ~156k params
//   mlp3         3 fc layers with 64-wide hidden, wants a flat input
//   linear_probe single fc layer, wants a flat input
std::vector<LayerSpec> preset_layers(const std::string& name,
                                     const std::vector<std::int64_t>& input_shape,
                                     std::int64_t classes);

// Everything the forward pass needs to know about precision. Weights
// and activations share fw_bits (weights through `weight_kind`,
// activations through the unsigned max-scale quantizer after each relu,
// the input once at the start); errors and gradients share bw_bits.
struct ForwardOptions {
  int fw_bits = 32;
  int bw_bits = 32;
  QuantKind weight_kind = QuantKind::max_scale_signed;
  bool quantize_input = true;
  bool input_signed = true;
  bool training = false;    // enables grads, error-quant nodes, ledger
  Rng* rng = nullptr;       // required when training with bw_bits < 32
  CostLedger* ledger = nullptr;  // training MAC accounting, optional
};

struct ForwardResult {
  Var logits;
  std::vector<Var> param_vars;  // leaf per parameter tensor, same order as params()
};

// Sequential network. Construction runs shape inference over the layer
// chain and rejects any mismatch; parameters are materialized as
// [weight, bias] pairs per conv/linear layer in layer order.
class Model {
 public:
  Model(std::vector<LayerSpec> layers, std::vector<std::int64_t> input_shape);

  // Kaiming-uniform fan-in init for weights (bound sqrt(6/fan_in)),
  // zero biases. Consumes rng in layer order.
  void init_params(Rng& rng);

  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }
  std::int64_t param_count() const;
  std::uint64_t macs_per_sample() const { return macs_per_sample_; }
  std::int64_t num_classes() const { return num_classes_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  const std::vector<std::int64_t>& input_shape() const { return input_shape_; }

  // batch: [N, input_shape...]. Appends the whole graph to `tp`.
  ForwardResult forward(Tape& tp, const Tensor& batch, const ForwardOptions& opt) const;

 private:
  std::vector<LayerSpec> layers_;
  std::vector<std::int64_t> input_shape_;
  std::vector<Tensor> params_;
  std::vector<std::uint64_t> layer_macs_;     // per layer, per sample (0 for non-MAC layers)
  std::uint64_t macs_per_sample_ = 0;
  std::int64_t num_classes_ = 0;
};

}  // namespace cpt
