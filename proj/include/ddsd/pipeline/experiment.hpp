#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ddsd/data/synth.hpp"
#include "ddsd/eval/metrics.hpp"
#include "ddsd/fusion/fusion.hpp"
#include "ddsd/models/component.hpp"
#include "ddsd/nn/train.hpp"

namespace ddsd::pipeline {

// Directedness features of every utterance in the fusion and test splits.
struct FusionSplits {
  std::vector<FusionSample> train;
  std::vector<FusionSample> val;
  std::vector<FusionSample> test;
};

struct ComponentStageConfig {
  std::array<int, kNumModalities> epochs{50, 50, 50, 50};  // indexed by Modality
  nn::TrainConfig train{};
};

struct ComponentStageResult {
  std::array<models::ComponentModel, kNumModalities> models;
  std::array<nn::TrainHistory, kNumModalities> histories;
  FusionSplits splits;
  std::array<eval::EvalReport, kNumModalities> test_reports;  // single-modality
  std::array<double, kNumModalities> train_seconds{};
};

// Trains all four component models on train-comp (val-comp for checkpoint
// selection) and exports their directedness features for the fusion and
// test splits. Model k is seeded with `seed + k`.
ComponentStageResult run_component_stage(const data::SynthCorpus& corpus, const ComponentStageConfig& config,
                                         std::uint64_t seed);

struct FusionRun {
  std::string name;
  fusion::FusionKind kind = fusion::FusionKind::kEl;
  std::vector<Modality> modalities;
  bool modality_dropout = false;
};

// The systems compared in the fusion tables: AVG, SL, EL over all four
// modalities, EL over the three verbal ones and EL with modality dropout.
std::vector<FusionRun> standard_fusion_runs();

struct FusionStageConfig {
  nn::TrainConfig train{};
  fusion::ModalityDropoutConfig dropout{};
  double corruption_rate = 0.3;
};

struct FusionStageResult {
  std::map<std::string, eval::EvalReport> clean;
  std::map<std::string, eval::EvalReport> corrupted;  // AVG omitted if a sample loses every modality
  std::map<std::string, fusion::FusionModel> models;
};

FusionStageResult run_fusion_stage(const FusionSplits& splits, const std::vector<FusionRun>& runs,
                                   const FusionStageConfig& config, std::uint64_t seed);

eval::EvalReport evaluate_scores(std::span<const double> scores, std::span<const FusionSample> samples);

}  // namespace ddsd::pipeline
