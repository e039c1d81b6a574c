#pragma once

#include <vector>

#include "ddsd/dsp/audio.hpp"
#include "ddsd/nn/tensor.hpp"

namespace ddsd::dsp {

inline constexpr std::size_t kMelBands = 40;
inline constexpr std::size_t kFilterbankFft = 512;
inline constexpr double kLogFloor = 1e-10;

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular mel filters over FFT bins, [band][bin], spanning 0 to 8 kHz.
std::vector<std::vector<double>> mel_filters(int sample_rate, std::size_t fft_size = kFilterbankFft,
                                             std::size_t bands = kMelBands);

// [T, 40] log-mel energies with 25 ms Hann windows and a 10 ms hop at 16 kHz;
// other rates are resampled first. Throws DataError on a too-short buffer.
nn::Tensor extract_filterbank(const AudioBuffer& audio);

}  // namespace ddsd::dsp
