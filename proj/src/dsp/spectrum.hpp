#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace ddsd::dsp::detail {

std::vector<double> hann_window(std::size_t n);

// Power spectrum |X_k|^2, k = 0..fft_size/2, of a windowed frame zero-padded
// to fft_size.
class PowerSpectrum {
 public:
  explicit PowerSpectrum(std::size_t fft_size) : fft_size_(fft_size), frame_(fft_size, 0.0) {}

  std::size_t bins() const { return fft_size_ / 2 + 1; }

  const std::vector<double>& compute(const double* x, const std::vector<double>& window) {
    std::fill(frame_.begin(), frame_.end(), 0.0);
    for (std::size_t i = 0; i < window.size(); ++i) frame_[i] = x[i] * window[i];
    fft_.fwd(spectrum_, frame_);
    power_.resize(bins());
    for (std::size_t k = 0; k < bins(); ++k) power_[k] = std::norm(spectrum_[k]);
    return power_;
  }

 private:
  std::size_t fft_size_;
  Eigen::FFT<double> fft_;
  std::vector<double> frame_;
  std::vector<std::complex<double>> spectrum_;
  std::vector<double> power_;
};

}  // namespace ddsd::dsp::detail
