#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace edffd {

/// Block-diagonal affine layer: the input splits into `groups` contiguous
/// slices, each mapped by its own (out/groups) x (in/groups) matrix.
/// groups == 1 is an ordinary dense layer.
struct GroupLinear {
  int groups = 1;
  int in = 0;
  int out = 0;
  std::vector<double> weights;  // groups blocks, each row-major (out/g) x (in/g)
  std::vector<double> biases;   // out

  GroupLinear() = default;
  /// Zero-initialised. Throws NotDivisible.
  GroupLinear(int in_width, int out_width, int n_groups);
  int group_in() const noexcept { return in / groups; }
  int group_out() const noexcept { return out / groups; }
  double& w(int group, int row, int col) noexcept {
    return weights[(static_cast<std::size_t>(group) * group_out() + row) * group_in() + col];
  }
  double w(int group, int row, int col) const noexcept {
    return weights[(static_cast<std::size_t>(group) * group_out() + row) * group_in() + col];
  }
};

/// Affine map without activation. Throws NotDivisible / WidthMismatch.
std::vector<double> affine_forward(std::span<const double> x, const GroupLinear& layer);
/// Affine map followed by a rectifier.
std::vector<double> gll_forward(std::span<const double> x, const GroupLinear& layer);

/// Three layers, rectifiers after the first two, plain affine output.
struct Head {
  std::array<GroupLinear, 3> layers;
  int input_width() const noexcept { return layers[0].in; }
  int output_width() const noexcept { return layers[2].out; }
};
/// Two group-wise layers followed by a dense fusion layer.
struct AsmaHead : Head {};
/// Dense baseline with the same widths.
struct MlpHead : Head {};

struct HeadWidths {
  int in = 0;
  int hidden1 = 0;
  int hidden2 = 0;
  int out = 0;
};

/// Weights uniform in +-sqrt(6 / (fan_in + fan_out)) per group, zero biases.
AsmaHead make_asma_head(const HeadWidths& widths, int n_groups, std::uint64_t seed);
MlpHead make_mlp_head(const HeadWidths& widths, std::uint64_t seed);

/// Throws WidthMismatch when the input or the layer chain does not line up.
std::vector<double> head_forward(std::span<const double> x, const Head& head);
std::vector<double> asma_forward(std::span<const double> x, const AsmaHead& head);

struct LayerGrad {
  std::vector<double> weights;
  std::vector<double> biases;
};
struct HeadGrad {
  std::vector<double> input;
  std::array<LayerGrad, 3> layers;
};
/// Reverse-mode gradients of dot(upstream, forward(x)).
HeadGrad head_backward(std::span<const double> x, const Head& head, std::span<const double> upstream);
HeadGrad asma_backward(std::span<const double> x, const AsmaHead& head,
                       std::span<const double> upstream);

struct ParamCount {
  std::size_t weights = 0;
  std::size_t biases = 0;
};
ParamCount param_count(const GroupLinear& layer) noexcept;
ParamCount param_count(const Head& head) noexcept;

struct Dataset {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> targets;
  std::size_t size() const noexcept { return inputs.size(); }
};

struct TrainOptions {
  int epochs = 60;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 32;
  std::uint64_t seed = 7;
};

struct TrainReport {
  double train_mse = 0.0;
  double heldout_mse = 0.0;
  std::vector<double> epoch_loss;
};

/// Mean over samples and outputs of the squared error.
double mean_squared_error(const Head& head, const Dataset& data);

/// Mini-batch SGD with momentum on the squared error; the batch order is
/// shuffled per epoch from `seed`. Throws Divergence on a non-finite loss.
TrainReport train_toy_regressor(Head& head, const Dataset& train, const Dataset& heldout,
                                const TrainOptions& opts);

/// {"model": "asma", "layers": [...]}; parse throws Schema naming the key.
std::string head_to_json(const AsmaHead& head);
AsmaHead asma_head_from_json(const std::string& text);

}  // namespace edffd
