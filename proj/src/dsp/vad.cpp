#include "ddsd/dsp/vad.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "ddsd/dsp/framing.hpp"
#include "ddsd/error.hpp"
#include "spectrum.hpp"

namespace ddsd::dsp {

namespace {

constexpr double kPowerFloor = 1e-10;

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

std::vector<double> vad_frame_probabilities(const AudioBuffer& audio, const VadConfig& config) {
  validate_audio(audio);
  const FrameGrid grid = prosody_grid(audio.size(), audio.sample_rate);
  if (grid.count == 0) throw DataError("audio shorter than one 40 ms analysis window");
  const std::size_t len = seconds_to_samples(kShortWindowSeconds, audio.sample_rate);
  const std::size_t offset = (grid.window - len) / 2;
  const auto window = detail::hann_window(len);
  double window_power = 0.0;
  for (double w : window) window_power += w * w;

  detail::PowerSpectrum spectrum(next_pow2(len));
  std::vector<double> probs(grid.count);
  for (std::size_t t = 0; t < grid.count; ++t) {
    const double* x = audio.samples.data() + grid.start(t) + offset;
    const auto& power = spectrum.compute(x, window);
    double energy = 0.0;
    for (std::size_t i = 0; i < len; ++i) energy += x[i] * x[i] * window[i] * window[i];
    const double energy_db = 10.0 * std::log10(energy / window_power + kPowerFloor);

    // Flatness over the bins between DC and Nyquist.
    double log_sum = 0.0, sum = 0.0;
    const std::size_t bins = power.size() - 2;
    for (std::size_t k = 1; k + 1 < power.size(); ++k) {
      const double p = power[k] + kPowerFloor;
      log_sum += std::log(p);
      sum += p;
    }
    const double flatness = std::exp(log_sum / bins) / (sum / bins);
    const double z = config.energy_scale * (energy_db - config.energy_offset_db) +
                     config.flatness_scale * (config.flatness_pivot - flatness);
    probs[t] = 1.0 / (1.0 + std::exp(-z));
  }
  return probs;
}

std::vector<double> hmm_smooth(std::span<const double> speech_prob, double self_transition) {
  const std::size_t n = speech_prob.size();
  if (!(self_transition > 0.0 && self_transition < 1.0)) throw UsageError("self-transition must lie in (0,1)");
  const double stay = self_transition, move = 1.0 - self_transition;
  // alpha[t] = (silence, speech), normalised each step.
  std::vector<std::array<double, 2>> alpha(n);
  std::array<double, 2> prev{0.5, 0.5};
  for (std::size_t t = 0; t < n; ++t) {
    const double p = speech_prob[t];
    std::array<double, 2> a{(1.0 - p), p};
    if (t > 0) {
      a[0] *= prev[0] * stay + prev[1] * move;
      a[1] *= prev[0] * move + prev[1] * stay;
    } else {
      a[0] *= 0.5;
      a[1] *= 0.5;
    }
    const double norm = a[0] + a[1];
    alpha[t] = {a[0] / norm, a[1] / norm};
    prev = alpha[t];
  }
  std::vector<double> posterior(n);
  std::array<double, 2> b{1.0, 1.0};
  for (std::size_t t = n; t-- > 0;) {
    const double s0 = alpha[t][0] * b[0], s1 = alpha[t][1] * b[1];
    posterior[t] = s1 / (s0 + s1);
    const double p = speech_prob[t];
    const double e0 = (1.0 - p) * b[0], e1 = p * b[1];
    std::array<double, 2> nb{stay * e0 + move * e1, move * e0 + stay * e1};
    const double norm = nb[0] + nb[1];
    b = {nb[0] / norm, nb[1] / norm};
  }
  return posterior;
}

std::vector<double> extract_vad(const AudioBuffer& audio, const VadConfig& config) {
  auto probs = vad_frame_probabilities(audio, config);
  for (double& p : probs) p = std::clamp(p, config.emission_floor, 1.0 - config.emission_floor);
  return hmm_smooth(probs, config.self_transition);
}

}  // namespace ddsd::dsp
