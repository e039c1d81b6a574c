#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ddsd/data/manifest.hpp"
#include "ddsd/data/modality.hpp"
#include "ddsd/data/records.hpp"
#include "ddsd/models/standardizer.hpp"
#include "ddsd/nn/graph.hpp"
#include "ddsd/nn/serialize.hpp"
#include "ddsd/nn/train.hpp"

namespace ddsd::models {

// A single-modality directedness classifier. The embedding handed to fusion
// is the output of graph layer `embedding_layer`; everything after it is the
// head.
struct ComponentModel {
  Modality modality = Modality::kProsody;
  nn::ModelGraph graph;
  Standardizer standardizer;
  std::size_t embedding_layer = 0;

  std::size_t embedding_dim() const { return graph.width_after(embedding_layer); }
  // Width of one feature row: [T, D] sequences for prosody/acoustic, [D]
  // vectors for text/asr.
  std::size_t feature_dim() const { return graph.input_width(); }
  bool sequence_input() const { return graph.is_sequence(); }
};

inline constexpr std::size_t kProsodyHidden = 128;
inline constexpr double kProsodyDropout = 0.2;
inline constexpr std::size_t kAcousticBands = 40;

// mask -> GRU(5->128) -> layer norm -> dropout(0.2) -> dense(128->1, sigmoid).
ComponentModel build_prosody_model(std::uint64_t seed = 0);
// Acoustic, text or ASR stand-in.
ComponentModel build_standin(Modality modality, std::uint64_t seed = 0);
ComponentModel build_component(Modality modality, std::uint64_t seed = 0);

// Raw (unstandardized) model inputs with their labels.
struct ComponentData {
  std::vector<std::string> uids;
  std::vector<nn::Tensor> features;
  std::vector<int> labels;

  std::size_t size() const { return features.size(); }
  void validate(const std::string& what) const;
};

// Fits the standardizer on `train`, sets the positive class weight to
// N_neg / N_pos and trains with val-EER checkpoint selection.
nn::TrainHistory train_component(ComponentModel& model, const ComponentData& train, const ComponentData& val,
                                 nn::TrainConfig config);

struct DirectednessOutput {
  double score = 0.0;
  std::vector<double> embedding;
};

DirectednessOutput infer_component(const ComponentModel& model, const nn::Tensor& features);
// Batched inference; sequences in a chunk are padded to the chunk maximum.
std::vector<DirectednessOutput> infer_components(const ComponentModel& model, std::span<const nn::Tensor> features,
                                                 std::size_t chunk = 128);
// Runs the head alone (inference mode) on an embedding.
double apply_head(const ComponentModel& model, std::span<const double> embedding);

// Scores only, used for validation.
std::vector<double> component_scores(const ComponentModel& model, std::span<const nn::Tensor> standardized,
                                     std::size_t chunk = 128);

nn::ModelFile to_model_file(const ComponentModel& model);
ComponentModel from_model_file(const nn::ModelFile& file);
void save_component(const ComponentModel& model, const std::filesystem::path& path);
ComponentModel load_component(const std::filesystem::path& path);

// One score record ([1]) and one embedding record ([dim]) per utterance.
std::vector<data::Record> directedness_records(Modality modality, std::span<const std::string> uids,
                                               std::span<const DirectednessOutput> outputs);

// Records of one modality for a set of fusion samples; absent entries keep
// their presence flag and sentinel payloads.
std::vector<data::Record> sample_records(std::span<const FusionSample> samples, Modality modality);

// Builds fusion samples for every manifest record from per-modality
// directedness record files. Modalities without a file, or records flagged
// absent, are marked absent. Throws DataError naming the utterance on a
// dimension mismatch or a manifest id missing from a supplied file.
std::vector<FusionSample> ingest_precomputed(const data::Manifest& manifest,
                                             std::span<const std::pair<Modality, std::vector<data::Record>>> files);
// File-based variant: reads `<dir>/<modality>.rec` for each listed modality
// that exists.
std::vector<FusionSample> ingest_precomputed(const data::Manifest& manifest, const std::filesystem::path& dir,
                                             std::span<const Modality> modalities);

std::filesystem::path directedness_path(const std::filesystem::path& dir, Modality modality);

}  // namespace ddsd::models
