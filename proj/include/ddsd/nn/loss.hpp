#pragma once

#include <span>
#include <vector>

namespace ddsd::nn {

struct ClassWeights {
  double positive = 1.0;
  double negative = 1.0;
};

inline constexpr double kBceEpsilon = 1e-7;

// -(w_pos * y * ln p + w_neg * (1 - y) * ln(1 - p)) with p clamped to
// [1e-7, 1 - 1e-7]. Throws DataError for labels other than 0 or 1.
double weighted_bce(double pred, double label, ClassWeights weights);

struct LossAndGrad {
  double loss = 0.0;          // mean over the batch
  std::vector<double> grad;   // d(mean loss)/d(pred_i)
};

LossAndGrad weighted_bce_batch(std::span<const double> preds, std::span<const double> labels,
                               ClassWeights weights);

}  // namespace ddsd::nn
