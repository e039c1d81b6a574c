#pragma once

#include <vector>

#include "ddsd/dsp/audio.hpp"

namespace ddsd::dsp {

struct PitchConfig {
  double min_hz = 60.0;
  double max_hz = 400.0;
  // Viterbi cost per unit |log f_t - log f_{t-1}|.
  double transition_weight = 0.5;
  // Local cost added per octave of lag above the shortest lag, against
  // sub-harmonic candidates that correlate as well as the true period.
  double octave_bias = 0.02;
  std::size_t max_candidates = 6;
  // voicing = logistic(slope * (peak - midpoint)); voiced when voicing >= 0.5.
  double voicing_slope = 12.0;
  double voicing_midpoint = 0.45;
};

struct PitchTrack {
  std::vector<double> pitch_hz;  // 0 when unvoiced
  std::vector<double> voicing;   // in [0, 1]
  std::vector<double> period;    // smoothed period in samples, also for unvoiced frames

  std::size_t size() const { return pitch_hz.size(); }
  bool voiced(std::size_t t) const { return pitch_hz[t] > 0.0; }
};

// Normalized cross-correlation inside one analysis window for integer lags
// [min_lag, max_lag]; exposed for tests.
std::vector<double> window_nccf(const double* x, std::size_t window, std::size_t min_lag, std::size_t max_lag);

// On the 40 ms / 10 ms prosody grid. Throws DataError when the buffer is
// shorter than one window or the rate is below 8 kHz.
PitchTrack extract_pitch_voicing(const AudioBuffer& audio, const PitchConfig& config = {});

}  // namespace ddsd::dsp
