#include "ddsd/nn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "ddsd/error.hpp"

namespace ddsd::nn {

namespace {
void check_label(double label) {
  if (label != 0.0 && label != 1.0) {
    throw DataError("weighted_bce: label must be 0 or 1, got " + std::to_string(label));
  }
}
}  // namespace

double weighted_bce(double pred, double label, ClassWeights weights) {
  check_label(label);
  const double p = std::clamp(pred, kBceEpsilon, 1.0 - kBceEpsilon);
  return -(weights.positive * label * std::log(p) + weights.negative * (1.0 - label) * std::log(1.0 - p));
}

LossAndGrad weighted_bce_batch(std::span<const double> preds, std::span<const double> labels,
                               ClassWeights weights) {
  if (preds.size() != labels.size() || preds.empty()) {
    throw ShapeError("weighted_bce: " + std::to_string(preds.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  LossAndGrad out;
  out.grad.resize(preds.size());
  const double n = static_cast<double>(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double y = labels[i];
    out.loss += weighted_bce(preds[i], y, weights);
    // The clamp only guards the logarithm; its gradient is passed straight
    // through so saturated mistakes keep a learning signal.
    const double p = std::clamp(preds[i], kBceEpsilon, 1.0 - kBceEpsilon);
    out.grad[i] = -(weights.positive * y / p - weights.negative * (1.0 - y) / (1.0 - p)) / n;
  }
  out.loss /= n;
  return out;
}

}  // namespace ddsd::nn
