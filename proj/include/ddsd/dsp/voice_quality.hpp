#pragma once

#include <vector>

#include "ddsd/dsp/audio.hpp"
#include "ddsd/dsp/pitch.hpp"

namespace ddsd::dsp {

// One glottal-cycle mark: fractional sample position and peak amplitude.
struct PeriodMark {
  double position = 0.0;
  double amplitude = 0.0;
  std::size_t chain = 0;  // marks in one voiced stretch share a chain id
};

// Places one mark per cycle across each voiced stretch by waveform matching
// against the previous cycle.
std::vector<PeriodMark> find_period_marks(const AudioBuffer& audio, const PitchTrack& pitch);

struct VoiceQualityTrack {
  std::vector<double> jitter;
  std::vector<double> shimmer;
};

// jitter = mean|T_i - T_{i-1}| / mean T_i and shimmer = mean|A_i - A_{i-1}| / mean A_i
// over the marks inside each frame's 40 ms window, clipped to [0,1]. Frames
// that are unvoiced or hold fewer than two complete cycles get 0.
VoiceQualityTrack extract_jitter_shimmer(const AudioBuffer& audio, const PitchTrack& pitch);

}  // namespace ddsd::dsp
