#pragma once

#include <span>
#include <vector>

#include "ddsd/dsp/audio.hpp"

namespace ddsd::dsp {

struct VadConfig {
  // Frame classifier: logistic(energy_scale * (E_dB - energy_offset_db)
  //                            + flatness_scale * (flatness_pivot - flatness)).
  double energy_scale = 0.5;
  double energy_offset_db = -45.0;
  double flatness_scale = 30.0;
  double flatness_pivot = 0.3;
  // Frame probabilities are clamped to [floor, 1 - floor] before smoothing so
  // that a single frame cannot outvote the transition prior.
  double emission_floor = 0.25;
  double self_transition = 0.9;
};

// Per-frame speech probability from the logistic classifier alone, on the
// prosody grid with 25 ms analysis windows centred on each frame.
std::vector<double> vad_frame_probabilities(const AudioBuffer& audio, const VadConfig& config = {});

// Speech-state posteriors of a 2-state HMM by forward-backward, treating each
// probability as the scaled speech likelihood.
std::vector<double> hmm_smooth(std::span<const double> speech_prob, double self_transition);

std::vector<double> extract_vad(const AudioBuffer& audio, const VadConfig& config = {});

}  // namespace ddsd::dsp
