#include "ddsd/pipeline/experiment.hpp"

#include <chrono>

#include "ddsd/error.hpp"
#include "ddsd/pipeline/features.hpp"

namespace ddsd::pipeline {

namespace {

std::vector<FusionSample> directedness_samples(const models::ComponentData& any,
                                               const std::array<std::vector<models::DirectednessOutput>,
                                                                kNumModalities>& outputs) {
  std::vector<FusionSample> samples(any.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i].uid = any.uids[i];
    samples[i].label = any.labels[i];
    for (Modality m : kAllModalities) {
      auto& f = samples[i][m];
      f.present = true;
      f.score = outputs[index_of(m)][i].score;
      f.embedding = outputs[index_of(m)][i].embedding;
    }
  }
  return samples;
}

}  // namespace

eval::EvalReport evaluate_scores(std::span<const double> scores, std::span<const FusionSample> samples) {
  std::vector<eval::ScoredEntry> entries(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) entries[i] = {scores[i], samples[i].label};
  return eval::evaluate(entries);
}

ComponentStageResult run_component_stage(const data::SynthCorpus& corpus, const ComponentStageConfig& config,
                                         std::uint64_t seed) {
  const data::Manifest manifest = data::corpus_manifest(corpus);
  const FeatureStore store = corpus_features(corpus, kAllModalities);
  const data::Manifest train_comp = manifest.filter(data::Split::kTrainComp);
  const data::Manifest val_comp = manifest.filter(data::Split::kValComp);
  const std::array<data::Manifest, 3> fusion_sets{manifest.filter(data::Split::kTrainFus),
                                                  manifest.filter(data::Split::kValFus),
                                                  manifest.filter(data::Split::kTest)};

  ComponentStageResult result;
  std::array<std::array<std::vector<models::DirectednessOutput>, kNumModalities>, 3> outputs;
  std::array<models::ComponentData, 3> reference;
  for (Modality m : kAllModalities) {
    const std::size_t k = index_of(m);
    auto& model = result.models[k];
    model = models::build_component(m, seed + k);
    nn::TrainConfig tc = config.train;
    tc.epochs = config.epochs[k];
    tc.seed = seed + k;
    const auto start = std::chrono::steady_clock::now();
    result.histories[k] =
        models::train_component(model, component_data(store, train_comp, m), component_data(store, val_comp, m), tc);
    result.train_seconds[k] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (std::size_t s = 0; s < 3; ++s) {
      models::ComponentData data = component_data(store, fusion_sets[s], m);
      outputs[s][k] = models::infer_components(model, data.features);
      if (k == 0) reference[s] = std::move(data);
    }
  }
  result.splits.train = directedness_samples(reference[0], outputs[0]);
  result.splits.val = directedness_samples(reference[1], outputs[1]);
  result.splits.test = directedness_samples(reference[2], outputs[2]);
  for (Modality m : kAllModalities) {
    std::vector<double> scores;
    for (const auto& o : outputs[2][index_of(m)]) scores.push_back(o.score);
    result.test_reports[index_of(m)] = evaluate_scores(scores, result.splits.test);
  }
  return result;
}

std::vector<FusionRun> standard_fusion_runs() {
  const std::vector<Modality> all(kAllModalities.begin(), kAllModalities.end());
  const std::vector<Modality> verbal{Modality::kAcoustic, Modality::kText, Modality::kAsr};
  return {
      {"AVG", fusion::FusionKind::kAvg, all, false},
      {"SL", fusion::FusionKind::kSl, all, false},
      {"EL", fusion::FusionKind::kEl, all, false},
      {"EL-verbal", fusion::FusionKind::kEl, verbal, false},
      {"EL+MD", fusion::FusionKind::kEl, all, true},
  };
}

FusionStageResult run_fusion_stage(const FusionSplits& splits, const std::vector<FusionRun>& runs,
                                   const FusionStageConfig& config, std::uint64_t seed) {
  FusionStageResult result;
  const auto corrupted = eval::corrupt_missing(splits.test, config.corruption_rate, seed + 1000);
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const FusionRun& run = runs[r];
    fusion::FusionModel model = fusion::build_fusion_model(run.kind, run.modalities, seed + 100 + r);
    if (run.kind != fusion::FusionKind::kAvg) {
      nn::TrainConfig tc = config.train;
      tc.seed = seed + 100 + r;
      std::optional<fusion::ModalityDropoutConfig> md;
      if (run.modality_dropout) {
        md = config.dropout;
        md->seed = seed + 200 + r;
      }
      fusion::train_fusion(model, splits.train, splits.val, tc, md);
    }
    result.clean[run.name] = evaluate_scores(fusion::infer_fusion(model, splits.test), splits.test);
    try {
      result.corrupted[run.name] = evaluate_scores(fusion::infer_fusion(model, corrupted.samples), corrupted.samples);
    } catch (const DataError&) {
      if (run.kind != fusion::FusionKind::kAvg) throw;
    }
    result.models.emplace(run.name, std::move(model));
  }
  return result;
}

}  // namespace ddsd::pipeline
