#include "ddsd/dsp/filterbank.hpp"

#include <algorithm>
#include <cmath>

#include "ddsd/dsp/framing.hpp"
#include "ddsd/error.hpp"
#include "spectrum.hpp"

namespace ddsd::dsp {

namespace {
constexpr double kMaxHz = 8000.0;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<std::vector<double>> mel_filters(int sample_rate, std::size_t fft_size, std::size_t bands) {
  const double mel_max = hz_to_mel(kMaxHz);
  const std::size_t bins = fft_size / 2 + 1;
  std::vector<double> edges(bands + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) edges[i] = mel_max * static_cast<double>(i) / (bands + 1);

  std::vector<std::vector<double>> filters(bands, std::vector<double>(bins, 0.0));
  for (std::size_t b = 0; b < bands; ++b) {
    for (std::size_t k = 0; k < bins; ++k) {
      const double mel = hz_to_mel(static_cast<double>(k) * sample_rate / fft_size);
      const double rise = (mel - edges[b]) / (edges[b + 1] - edges[b]);
      const double fall = (edges[b + 2] - mel) / (edges[b + 2] - edges[b + 1]);
      filters[b][k] = std::max(0.0, std::min(rise, fall));
    }
  }
  return filters;
}

nn::Tensor extract_filterbank(const AudioBuffer& input) {
  validate_audio(input);
  const AudioBuffer audio = resample(input, kDefaultSampleRate);
  const FrameGrid grid = make_grid(audio.size(), seconds_to_samples(kShortWindowSeconds, kDefaultSampleRate),
                                   seconds_to_samples(kHopSeconds, kDefaultSampleRate));
  if (grid.count == 0) throw DataError("audio shorter than one 25 ms filterbank window");

  const auto window = detail::hann_window(grid.window);
  const auto filters = mel_filters(kDefaultSampleRate);
  detail::PowerSpectrum spectrum(kFilterbankFft);
  nn::Tensor out({grid.count, kMelBands});
  for (std::size_t t = 0; t < grid.count; ++t) {
    const auto& power = spectrum.compute(audio.samples.data() + grid.start(t), window);
    for (std::size_t b = 0; b < kMelBands; ++b) {
      double e = 0.0;
      for (std::size_t k = 0; k < power.size(); ++k) e += filters[b][k] * power[k];
      out.at(t, b) = std::log(std::max(e, kLogFloor));
    }
  }
  return out;
}

}  // namespace ddsd::dsp
