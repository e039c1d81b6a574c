#pragma once

#include <cstdint>
#include <vector>

#include "ddsd/nn/graph.hpp"

namespace ddsd::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double grad_clip_norm = 1.0;
};

// Scales `grads` in place so their joint L2 norm is at most `max_norm`.
// Returns the norm before clipping.
double clip_global_norm(std::vector<Tensor>& grads, double max_norm);

class Adam {
 public:
  Adam(const ModelGraph& graph, AdamConfig config);

  // Rejects non-finite gradients (NumericError naming the parameter), clips
  // to the configured global norm, then applies one bias-corrected update.
  void step(ModelGraph& graph, std::vector<Tensor>& grads);

  std::int64_t steps() const { return t_; }

 private:
  AdamConfig config_;
  std::int64_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace ddsd::nn
