#include "ddsd/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "ddsd/error.hpp"
#include "ddsd/nn/optim.hpp"

namespace ddsd::nn {

void TrainConfig::validate() const {
  if (epochs <= 0) throw UsageError("train config: epochs must be positive");
  if (batch_size == 0) throw UsageError("train config: batch_size must be positive");
  if (!(learning_rate > 0.0)) throw UsageError("train config: learning_rate must be positive");
  if (!(grad_clip_norm > 0.0)) throw UsageError("train config: grad_clip_norm must be positive");
  if (!(class_weights.positive > 0.0) || !(class_weights.negative > 0.0)) {
    throw UsageError("train config: class weights must be positive");
  }
}

TrainHistory fit(ModelGraph& graph, const TrainSet& train, const Validator& validate,
                 const TrainConfig& config) {
  config.validate();
  if (train.size == 0) throw DataError("fit: empty training set");

  std::mt19937_64 rng(config.seed);
  Adam adam(graph, {.learning_rate = config.learning_rate, .grad_clip_norm = config.grad_clip_norm});
  std::vector<std::size_t> order(train.size);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainHistory history;
  history.best_val_metric = std::numeric_limits<double>::infinity();
  std::vector<NamedTensor> best = graph.params();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Batch batch = train.make_batch(idx, true, rng);
      ForwardOptions options;
      options.lengths = batch.lengths;
      options.train_mode = true;
      options.rng = &rng;
      const ForwardPass pass = forward(graph, batch.input, options);
      const Tensor& out = pass.output();
      if (!out.all_finite()) {
        throw NumericError("training diverged: non-finite output in epoch " + std::to_string(epoch));
      }
      const auto lg = weighted_bce_batch(out.values(), batch.labels, config.class_weights);
      Tensor dout(out.shape(), lg.grad);
      Gradients grads = backward(graph, pass, dout);
      if (!std::isfinite(lg.loss)) {
        throw NumericError("training diverged: non-finite loss in epoch " + std::to_string(epoch));
      }
      adam.step(graph, grads.params);
      loss_sum += lg.loss;
      ++batches;
    }
    for (const auto& p : graph.params()) {
      if (!p.tensor.all_finite()) {
        throw NumericError("training diverged: parameter " + p.name + " is not finite after epoch " +
                           std::to_string(epoch));
      }
    }
    const double metric = validate ? validate(graph) : loss_sum / static_cast<double>(batches);
    history.epochs.push_back({epoch, loss_sum / static_cast<double>(batches), metric});
    if (metric < history.best_val_metric) {
      history.best_val_metric = metric;
      history.best_epoch = epoch;
      best = graph.params();
    }
  }
  graph.params() = std::move(best);
  return history;
}

std::vector<double> predict(const ModelGraph& graph, std::size_t count, const BatchBuilder& make_batch,
                            std::size_t chunk) {
  std::vector<double> out;
  std::vector<std::size_t> idx;
  std::mt19937_64 unused(0);
  for (std::size_t start = 0; start < count; start += chunk) {
    const std::size_t stop = std::min(count, start + chunk);
    idx.resize(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    const Batch batch = make_batch(idx, false, unused);
    ForwardOptions options;
    options.lengths = batch.lengths;
    const ForwardPass pass = forward(graph, batch.input, options);
    const auto v = pass.output().values();
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

}  // namespace ddsd::nn
