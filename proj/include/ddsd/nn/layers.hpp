#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace ddsd::nn {

enum class Activation : std::uint8_t { kLinear = 0, kSigmoid = 1, kTanh = 2, kRelu = 3 };

// Marks a sequence graph; forward() then requires per-sample valid lengths.
struct MaskLayer {};

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::kLinear;
};

// Single-layer GRU over [batch, time, in]; emits the hidden state at each
// sample's last valid step, shape [batch, hidden].
struct GruLayer {
  std::size_t in = 0;
  std::size_t hidden = 0;
};

struct LayerNormLayer {
  std::size_t dim = 0;
  double epsilon = 1e-5;
};

struct DropoutLayer {
  double rate = 0.0;
};

// Independent dense branches over consecutive column slices of the input,
// outputs concatenated in branch order.
struct BranchDenseLayer {
  std::vector<std::size_t> in_dims;
  std::size_t out = 0;
  Activation activation = Activation::kLinear;
};

// Element-wise logit ln(s / (1 - s)) on scores clamped to [1e-6, 1 - 1e-6].
// Negative inputs are missing-score sentinels and pass through unchanged.
struct InverseSoftmaxLayer {
  std::size_t dim = 0;
};

using Layer = std::variant<MaskLayer, DenseLayer, GruLayer, LayerNormLayer, DropoutLayer,
                           BranchDenseLayer, InverseSoftmaxLayer>;

std::string layer_kind(const Layer& layer);
std::string activation_name(Activation activation);

// Feature width flowing out of `layer` given the incoming width.
std::size_t output_width(const Layer& layer, std::size_t input_width);

inline double kInverseSoftmaxClamp = 1e-6;

}  // namespace ddsd::nn
