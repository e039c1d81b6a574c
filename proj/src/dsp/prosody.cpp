#include "ddsd/dsp/prosody.hpp"

#include <cmath>
#include <sstream>

#include "ddsd/dsp/voice_quality.hpp"
#include "ddsd/error.hpp"

namespace ddsd::dsp {

nn::Tensor assemble_prosody_track(const AudioBuffer& audio, const ProsodyConfig& config) {
  const PitchTrack pitch = extract_pitch_voicing(audio, config.pitch);
  const VoiceQualityTrack quality = extract_jitter_shimmer(audio, pitch);
  const std::vector<double> vad = extract_vad(audio, config.vad);
  const std::size_t T = pitch.size();
  if (vad.size() != T || quality.jitter.size() != T) throw ShapeError("prosody extractors disagree on frame count");

  nn::Tensor track({T, kProsodyColumns});
  for (std::size_t t = 0; t < T; ++t) {
    track.at(t, kLogPitch) = pitch.voiced(t) ? std::log(pitch.pitch_hz[t]) : 0.0;
    track.at(t, kVoicing) = pitch.voicing[t];
    track.at(t, kJitter) = quality.jitter[t];
    track.at(t, kShimmer) = quality.shimmer[t];
    track.at(t, kVad) = vad[t];
  }
  return track;
}

std::string feature_text_dump(const nn::Tensor& frames) {
  if (frames.rank() != 2) throw ShapeError("feature dump expects a [T, D] matrix, got " + nn::shape_string(frames.shape()));
  std::ostringstream out;
  out.precision(9);
  out << "# frames " << frames.dim(0) << " columns " << frames.dim(1) << "\n";
  for (std::size_t t = 0; t < frames.dim(0); ++t) {
    for (std::size_t c = 0; c < frames.dim(1); ++c) out << (c ? " " : "") << frames.at(t, c);
    out << "\n";
  }
  return out.str();
}

}  // namespace ddsd::dsp
