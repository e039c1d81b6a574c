#include "ddsd/dsp/pitch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ddsd/dsp/framing.hpp"
#include "ddsd/error.hpp"

namespace ddsd::dsp {

namespace {

// Keeps near-silent windows from producing spurious correlation peaks.
constexpr double kBallastPerSample = 1e-7;

struct Candidate {
  double lag;
  double nccf;
};

// Fixed-order dot product: four interleaved partial sums, so the result does
// not depend on the alignment of the buffers.
double dot(const double* a, const double* b, std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (std::size_t k = 0; k < 4; ++k) acc[k] += a[i + k] * b[i + k];
  }
  for (; i < n; ++i) acc[0] += a[i] * b[i];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

// Correlation is measured on a low-passed copy: broad peaks make the
// parabolic lag refinement accurate, so a sub-harmonic lag that happens to
// fall on an integer sample cannot beat the true period on sampling grounds.
constexpr double kLowpassHz = 1000.0;
constexpr long kLowpassHalfTaps = 32;

std::vector<double> lowpass(const std::vector<double>& x, int sample_rate) {
  const double fc = std::min(kLowpassHz / sample_rate, 0.5);
  std::vector<double> taps(2 * kLowpassHalfTaps + 1);
  double sum = 0.0;
  for (long k = -kLowpassHalfTaps; k <= kLowpassHalfTaps; ++k) {
    const double d = static_cast<double>(k);
    const double sinc = k == 0 ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * d) / (std::numbers::pi * d);
    const double window = 0.5 + 0.5 * std::cos(std::numbers::pi * d / (kLowpassHalfTaps + 1));
    taps[static_cast<std::size_t>(k + kLowpassHalfTaps)] = sinc * window;
    sum += sinc * window;
  }
  for (double& t : taps) t /= sum;
  const long n = static_cast<long>(x.size());
  std::vector<double> y(x.size(), 0.0);
  for (long i = 0; i < n; ++i) {
    double acc = 0.0;
    for (long k = std::max(-kLowpassHalfTaps, i - n + 1); k <= std::min(kLowpassHalfTaps, i); ++k) {
      acc += taps[static_cast<std::size_t>(k + kLowpassHalfTaps)] * x[static_cast<std::size_t>(i - k)];
    }
    y[static_cast<std::size_t>(i)] = acc;
  }
  return y;
}

std::vector<Candidate> frame_candidates(const std::vector<double>& c, std::size_t first_lag, std::size_t min_lag,
                                        std::size_t max_lag, std::size_t keep) {
  std::vector<Candidate> peaks;
  for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
    const std::size_t i = lag - first_lag;
    const double prev = c[i - 1], cur = c[i], next = c[i + 1];
    if (cur <= 0.0 || cur < prev || cur <= next) continue;
    const double denom = prev - 2.0 * cur + next;
    double delta = denom < 0.0 ? 0.5 * (prev - next) / denom : 0.0;
    delta = std::clamp(delta, -0.5, 0.5);
    peaks.push_back({lag + delta, std::min(1.0, cur - 0.25 * (prev - next) * delta)});
  }
  std::sort(peaks.begin(), peaks.end(), [](const Candidate& a, const Candidate& b) {
    return a.nccf != b.nccf ? a.nccf > b.nccf : a.lag < b.lag;
  });
  if (peaks.size() > keep) peaks.resize(keep);
  if (peaks.empty()) {
    std::size_t best = min_lag;
    for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
      if (c[lag - first_lag] > c[best - first_lag]) best = lag;
    }
    peaks.push_back({static_cast<double>(best), std::max(0.0, c[best - first_lag])});
  }
  return peaks;
}

}  // namespace

std::vector<double> window_nccf(const double* x, std::size_t window, std::size_t min_lag, std::size_t max_lag) {
  std::vector<double> prefix(window + 1, 0.0);
  for (std::size_t n = 0; n < window; ++n) prefix[n + 1] = prefix[n] + x[n] * x[n];
  const double ballast = kBallastPerSample * static_cast<double>(window);
  std::vector<double> out;
  out.reserve(max_lag - min_lag + 1);
  for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
    const std::size_t len = window - lag;
    const double cross = dot(x, x + lag, len);
    const double e0 = prefix[len];
    const double e1 = prefix[window] - prefix[lag];
    out.push_back(cross / std::sqrt((e0 + ballast) * (e1 + ballast)));
  }
  return out;
}

PitchTrack extract_pitch_voicing(const AudioBuffer& audio, const PitchConfig& config) {
  validate_audio(audio);
  if (audio.sample_rate < 8000) throw DataError("pitch tracking needs a sample rate of at least 8 kHz");
  if (!(config.min_hz > 0 && config.max_hz > config.min_hz)) throw UsageError("invalid pitch range");
  const FrameGrid grid = prosody_grid(audio.size(), audio.sample_rate);
  if (grid.count == 0) throw DataError("audio shorter than one 40 ms analysis window");

  const double sr = audio.sample_rate;
  const auto min_lag = static_cast<std::size_t>(std::floor(sr / config.max_hz));
  const auto max_lag = std::min(static_cast<std::size_t>(std::ceil(sr / config.min_hz)), grid.window - 2);
  const std::size_t first_lag = min_lag - 1;

  const std::vector<double> smooth = lowpass(audio.samples, audio.sample_rate);
  std::vector<std::vector<Candidate>> candidates(grid.count);
  std::vector<double> peak(grid.count, 0.0);
  for (std::size_t t = 0; t < grid.count; ++t) {
    const auto c = window_nccf(smooth.data() + grid.start(t), grid.window, first_lag, max_lag + 1);
    candidates[t] = frame_candidates(c, first_lag, min_lag, max_lag, config.max_candidates);
    peak[t] = candidates[t].front().nccf;
  }

  // Viterbi over the per-frame candidate lags.
  auto local_cost = [&](const Candidate& k) {
    return 1.0 - k.nccf + config.octave_bias * std::log2(k.lag / static_cast<double>(min_lag));
  };
  std::vector<std::vector<std::size_t>> back(grid.count);
  std::vector<double> cost;
  for (const auto& k : candidates[0]) cost.push_back(local_cost(k));
  for (std::size_t t = 1; t < grid.count; ++t) {
    std::vector<double> next(candidates[t].size());
    back[t].resize(candidates[t].size());
    for (std::size_t i = 0; i < candidates[t].size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t j = 0; j < candidates[t - 1].size(); ++j) {
        const double jump = std::abs(std::log(candidates[t][i].lag / candidates[t - 1][j].lag));
        const double total = cost[j] + config.transition_weight * jump;
        if (total < best) {
          best = total;
          arg = j;
        }
      }
      next[i] = best + local_cost(candidates[t][i]);
      back[t][i] = arg;
    }
    cost = std::move(next);
  }

  PitchTrack track;
  track.pitch_hz.resize(grid.count);
  track.voicing.resize(grid.count);
  track.period.resize(grid.count);
  std::size_t state = static_cast<std::size_t>(std::min_element(cost.begin(), cost.end()) - cost.begin());
  for (std::size_t t = grid.count; t-- > 0;) {
    const double lag = candidates[t][state].lag;
    const double voicing = 1.0 / (1.0 + std::exp(-config.voicing_slope * (peak[t] - config.voicing_midpoint)));
    track.period[t] = lag;
    track.voicing[t] = voicing;
    track.pitch_hz[t] = voicing >= 0.5 ? std::clamp(sr / lag, config.min_hz, config.max_hz) : 0.0;
    if (t > 0) state = back[t][state];
  }
  return track;
}

}  // namespace ddsd::dsp
