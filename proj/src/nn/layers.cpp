#include "ddsd/nn/layers.hpp"

#include <numeric>

namespace ddsd::nn {

namespace {
template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;
}  // namespace

std::string layer_kind(const Layer& layer) {
  return std::visit(Overloaded{
                        [](const MaskLayer&) { return std::string("mask"); },
                        [](const DenseLayer&) { return std::string("dense"); },
                        [](const GruLayer&) { return std::string("gru"); },
                        [](const LayerNormLayer&) { return std::string("layer_norm"); },
                        [](const DropoutLayer&) { return std::string("dropout"); },
                        [](const BranchDenseLayer&) { return std::string("branch_dense"); },
                        [](const InverseSoftmaxLayer&) { return std::string("inverse_softmax"); },
                    },
                    layer);
}

std::string activation_name(Activation activation) {
  switch (activation) {
    case Activation::kLinear: return "linear";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
  }
  return "unknown";
}

std::size_t output_width(const Layer& layer, std::size_t input_width) {
  return std::visit(Overloaded{
                        [&](const MaskLayer&) { return input_width; },
                        [](const DenseLayer& l) { return l.out; },
                        [](const GruLayer& l) { return l.hidden; },
                        [&](const LayerNormLayer&) { return input_width; },
                        [&](const DropoutLayer&) { return input_width; },
                        [](const BranchDenseLayer& l) { return l.out * l.in_dims.size(); },
                        [&](const InverseSoftmaxLayer&) { return input_width; },
                    },
                    layer);
}

}  // namespace ddsd::nn
