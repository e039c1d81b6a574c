#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "ddsd/data/manifest.hpp"
#include "ddsd/dsp/audio.hpp"

namespace ddsd::data {

inline constexpr std::size_t kAsrFeatureDim = 8;

// Directed / not-directed counts per split, in the order of kAllSplits.
inline constexpr std::array<std::array<double, 2>, kNumSplits> kTable1Counts{{
    {5200, 30000}, {3400, 18000}, {2600, 12500}, {1500, 7400}, {3100, 17000}}};

struct SynthConfig {
  // Fraction of the reference split counts.
  double scale = 0.1;
  // Class-mean distance of each modality's latent in noise-sigma units,
  // indexed by Modality.
  std::array<double, kNumModalities> separability{1.1, 1.4, 1.6, 1.3};
  // Correlation of the latent noise across modalities, carried by a shared
  // per-utterance nuisance factor.
  double correlation = 0.5;
  // Correlation between the nuisance factor and its only observable proxy,
  // ASR feature 5. No single component can use it to correct the others.
  double nuisance_visibility = 0.95;
  // not-directed : directed. Unset keeps the reference per-split counts.
  std::optional<double> imbalance;
  double min_duration = 0.5;
  double max_duration = 0.8;
  std::size_t utterances_per_speaker = 20;
  std::uint64_t seed = 1;

  void validate() const;
  // {directed, not-directed} for one split.
  std::array<std::size_t, 2> split_counts(Split split) const;
};

// Per-utterance hidden variables, kept for tests and diagnostics.
struct SynthLatents {
  int label = 0;
  double nuisance = 0.0;
  std::array<double, kNumModalities> z{};
};

struct SynthUtterance {
  ManifestRecord record;
  dsp::AudioBuffer audio;  // already on the 16-bit grid
  std::vector<double> asr_features;
  SynthLatents latents;
};

struct SynthCorpus {
  std::vector<SynthUtterance> utterances;
};

SynthCorpus generate_synthetic_corpus(const SynthConfig& config);

// Writes manifest.jsonl, audio/<uid>.wav and features/asr.rec under dir.
Manifest write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);

// Manifest view of an in-memory corpus (no feature paths).
Manifest corpus_manifest(const SynthCorpus& corpus);

}  // namespace ddsd::data
