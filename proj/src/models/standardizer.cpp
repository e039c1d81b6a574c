#include "ddsd/models/standardizer.hpp"

#include <cmath>

#include "ddsd/error.hpp"

namespace ddsd::models {

namespace {
constexpr double kMinStd = 1e-8;
}

Standardizer::Standardizer(std::vector<double> mean, std::vector<double> stddev)
    : mean_(std::move(mean)), stddev_(std::move(stddev)) {
  if (mean_.size() != stddev_.size()) throw ShapeError("standardizer mean/std sizes differ");
  for (double s : stddev_) {
    if (!(s > 0.0)) throw DataError("standardizer std must be positive");
  }
}

Standardizer Standardizer::fit(std::span<const nn::Tensor> features) {
  if (features.empty()) throw DataError("cannot fit a standardizer on no data");
  const std::size_t d = features.front().shape().back();
  std::vector<double> sum(d, 0.0), sq(d, 0.0);
  double rows = 0.0;
  for (const auto& f : features) {
    if (f.shape().back() != d) throw ShapeError("standardizer: inconsistent feature width");
    const auto v = f.values();
    for (std::size_t i = 0; i < v.size(); ++i) sum[i % d] += v[i];
    rows += static_cast<double>(v.size() / d);
  }
  std::vector<double> mean(d);
  for (std::size_t j = 0; j < d; ++j) mean[j] = sum[j] / rows;
  for (const auto& f : features) {
    const auto v = f.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double c = v[i] - mean[i % d];
      sq[i % d] += c * c;
    }
  }
  std::vector<double> stddev(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double s = std::sqrt(sq[j] / rows);
    stddev[j] = s > kMinStd ? s : 1.0;
  }
  return Standardizer(std::move(mean), std::move(stddev));
}

nn::Tensor Standardizer::apply(const nn::Tensor& features) const {
  if (!fitted()) return features;
  const std::size_t d = dim();
  if (features.rank() == 0 || features.shape().back() != d) {
    throw ShapeError("standardizer expects width " + std::to_string(d) + ", got " +
                     nn::shape_string(features.shape()));
  }
  nn::Tensor out = features;
  double* v = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) v[i] = (v[i] - mean_[i % d]) / stddev_[i % d];
  return out;
}

}  // namespace ddsd::models
