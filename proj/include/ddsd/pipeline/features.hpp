#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>

#include "ddsd/data/manifest.hpp"
#include "ddsd/data/synth.hpp"
#include "ddsd/dsp/audio.hpp"
#include "ddsd/models/component.hpp"

namespace ddsd::pipeline {

// Per-modality uid -> raw feature tensor. Text features are not stored: they
// are hashed from the manifest transcript when a data set is assembled.
class FeatureStore {
 public:
  void put(Modality m, const std::string& uid, nn::Tensor features);
  bool has(Modality m, const std::string& uid) const;
  // Throws DataError naming the utterance when missing.
  const nn::Tensor& get(Modality m, const std::string& uid) const;
  std::size_t size(Modality m) const { return tables_[index_of(m)].size(); }

 private:
  std::array<std::unordered_map<std::string, nn::Tensor>, kNumModalities> tables_;
};

bool audio_modality(Modality m);  // prosody and acoustic come from audio

// [T, 5] prosody track or [T, 40] log-mel filterbank.
nn::Tensor audio_features(Modality m, const dsp::AudioBuffer& audio);

FeatureStore corpus_features(const data::SynthCorpus& corpus, std::span<const Modality> modalities);

// Computes audio-derived features for every manifest record, writes
// features/<modality>.rec under the manifest directory and points the
// records at it. Returns the updated manifest.
data::Manifest extract_manifest_features(const data::Manifest& manifest, std::span<const Modality> modalities);

// Loads the feature record files a manifest references for `modalities`
// (text excluded).
FeatureStore load_features(const data::Manifest& manifest, std::span<const Modality> modalities);

// Inputs and labels for one modality over the manifest's records, in order.
models::ComponentData component_data(const FeatureStore& store, const data::Manifest& manifest, Modality m);

}  // namespace ddsd::pipeline
