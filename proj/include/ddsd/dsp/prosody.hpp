#pragma once

#include <string>

#include "ddsd/dsp/audio.hpp"
#include "ddsd/dsp/pitch.hpp"
#include "ddsd/dsp/vad.hpp"
#include "ddsd/nn/tensor.hpp"

namespace ddsd::dsp {

inline constexpr std::size_t kProsodyColumns = 5;
enum ProsodyColumn : std::size_t { kLogPitch = 0, kVoicing, kJitter, kShimmer, kVad };

struct ProsodyConfig {
  PitchConfig pitch;
  VadConfig vad;
};

// [T, 5] track: log pitch in Hz (0 when unvoiced), voicing, jitter, shimmer,
// VAD posterior. T = floor((n - window) / hop) + 1 with a 40 ms window.
nn::Tensor assemble_prosody_track(const AudioBuffer& audio, const ProsodyConfig& config = {});

// Whitespace-separated rows, one frame per line, for debugging.
std::string feature_text_dump(const nn::Tensor& frames);

}  // namespace ddsd::dsp
