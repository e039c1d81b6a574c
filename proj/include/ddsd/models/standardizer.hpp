#pragma once

#include <span>
#include <vector>

#include "ddsd/nn/tensor.hpp"

namespace ddsd::models {

// Per-dimension z-scoring over the last axis. Dimensions with (near) zero
// spread keep unit scale so constant inputs pass through centred.
class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(std::vector<double> mean, std::vector<double> stddev);

  // Fits on every row of every [T, D] or [D] tensor.
  static Standardizer fit(std::span<const nn::Tensor> features);

  bool fitted() const { return !mean_.empty(); }
  std::size_t dim() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& stddev() const { return stddev_; }

  nn::Tensor apply(const nn::Tensor& features) const;

  bool operator==(const Standardizer&) const = default;

 private:
  std::vector<double> mean_;
  std::vector<double> stddev_;
};

}  // namespace ddsd::models
