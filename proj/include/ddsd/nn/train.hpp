#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "ddsd/nn/graph.hpp"
#include "ddsd/nn/loss.hpp"

namespace ddsd::nn {

struct TrainConfig {
  int epochs = 50;
  double learning_rate = 1e-3;
  std::size_t batch_size = 150;
  double grad_clip_norm = 1.0;
  ClassWeights class_weights{};
  std::uint64_t seed = 0;

  void validate() const;
};

struct Batch {
  Tensor input;
  std::vector<std::size_t> lengths;  // empty for non-sequence graphs
  std::vector<double> labels;
};

// Builds the batch for the given sample indices. `train` is set while
// fitting, and `rng` is the trainer's generator for any per-sample
// augmentation (e.g. modality dropout).
using BatchBuilder =
    std::function<Batch(std::span<const std::size_t> indices, bool train, std::mt19937_64& rng)>;

struct TrainSet {
  std::size_t size = 0;
  BatchBuilder make_batch;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_metric = 0.0;
};

// Validation metric to minimize (val EER for every model here).
using Validator = std::function<double(const ModelGraph&)>;

// Mini-batch Adam with weighted BCE on the graph's sigmoid output. Data order
// is reshuffled every epoch from `config.seed`; after each epoch the
// validator runs and the parameters with the lowest metric are restored at
// the end.
TrainHistory fit(ModelGraph& graph, const TrainSet& train, const Validator& validate,
                 const TrainConfig& config);

// Runs the graph in inference mode over `count` samples in chunks and returns
// the flattened outputs of layer `end_layer - 1`.
std::vector<double> predict(const ModelGraph& graph, std::size_t count, const BatchBuilder& make_batch,
                            std::size_t chunk = 256);

}  // namespace ddsd::nn
