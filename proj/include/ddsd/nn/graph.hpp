#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ddsd/nn/layers.hpp"
#include "ddsd/nn/tensor.hpp"

namespace ddsd::nn {

struct NamedTensor {
  std::string name;
  Tensor tensor;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

// Ordered layer stack plus its parameters. Parameters of layer i occupy the
// contiguous range param_range(i) of params().
class ModelGraph {
 public:
  explicit ModelGraph(std::uint64_t seed = 0);

  // Appends a layer, allocating and initializing its parameters from the
  // graph's seeded generator (Glorot-uniform weights, zero biases, unit
  // layer-norm gain).
  ModelGraph& add(Layer layer);

  // Rebuilds a graph from stored parts; parameter names and shapes must match
  // what the layer list implies.
  static ModelGraph from_parts(std::uint64_t seed, std::vector<Layer> layers,
                               std::vector<NamedTensor> params);

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<NamedTensor>& params() { return params_; }
  const std::vector<NamedTensor>& params() const { return params_; }
  std::pair<std::size_t, std::size_t> param_range(std::size_t layer) const;
  Tensor& param(const std::string& name);
  const Tensor& param(const std::string& name) const;

  std::uint64_t seed() const { return seed_; }
  std::size_t parameter_count() const;
  bool has_mask() const;
  bool is_sequence() const;
  // Feature width expected at the input of the first layer.
  std::size_t input_width() const;
  // Width of the activation leaving layer `index`.
  std::size_t width_after(std::size_t index) const;

  friend bool operator==(const ModelGraph&, const ModelGraph&);

 private:
  std::vector<Tensor> make_params(std::size_t index, const Layer& layer, bool initialize);

  std::uint64_t seed_;
  std::mt19937_64 init_rng_;
  std::vector<Layer> layers_;
  std::vector<NamedTensor> params_;
  std::vector<std::size_t> param_begin_;
};

struct ForwardOptions {
  // Valid length of each sequence in the batch; required iff the graph has a
  // mask layer.
  std::span<const std::size_t> lengths{};
  bool train_mode = false;
  // Source of dropout masks; required in train mode when the graph has
  // dropout.
  std::mt19937_64* rng = nullptr;
  // Half-open range of layers to run.
  std::size_t first_layer = 0;
  std::size_t end_layer = std::numeric_limits<std::size_t>::max();
};

struct LayerCache {
  std::vector<Tensor> tensors;
};

// Record of one forward pass: every layer's input and output plus whatever
// the backward pass of each layer needs. A default-constructed pass is empty.
struct ForwardPass {
  std::size_t first_layer = 0;
  std::vector<std::size_t> lengths;
  std::vector<Tensor> inputs;
  std::vector<Tensor> outputs;
  std::vector<LayerCache> caches;

  bool empty() const { return outputs.empty(); }
  const Tensor& output() const;
  // Output of graph layer `layer` (absolute index).
  const Tensor& layer_output(std::size_t layer) const;
  std::size_t end_layer() const { return first_layer + outputs.size(); }
};

struct Gradients {
  // One tensor per graph parameter, same order and shapes; parameters of
  // layers outside the recorded range get zero gradients.
  std::vector<Tensor> params;
  Tensor input;
};

ForwardPass forward(const ModelGraph& graph, const Tensor& input, const ForwardOptions& options = {});

// Back-propagates d(loss)/d(output) through a recorded forward pass.
Gradients backward(const ModelGraph& graph, const ForwardPass& pass, const Tensor& output_grad);

// Single GRU step on one sample, exposed for testing. Parameter layout as in
// the graph: kernel [in, 3H], recurrent [H, 3H], bias [3H], gate column blocks
// ordered update | reset | candidate.
std::vector<double> gru_cell(std::span<const double> x, std::span<const double> h_prev,
                             const Tensor& kernel, const Tensor& recurrent, const Tensor& bias);

// Pads variable-length [T_i, D] sequences into [B, T_max, D].
Tensor pad_sequences(std::span<const Tensor> sequences, std::vector<std::size_t>* lengths);

}  // namespace ddsd::nn
