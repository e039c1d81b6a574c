#include "ddsd/models/component.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "ddsd/data/synth.hpp"
#include "ddsd/dsp/prosody.hpp"
#include "ddsd/error.hpp"
#include "ddsd/eval/metrics.hpp"
#include "ddsd/models/text_features.hpp"
#include "ddsd/parallel.hpp"

namespace ddsd::models {

namespace {

using nn::Activation;
using nn::Tensor;

constexpr std::size_t kTextHidden = 128;
constexpr std::size_t kAsrHidden = 16;
constexpr std::size_t kAcousticHidden = 256;

void check_embedding_dim(const ComponentModel& model) {
  if (model.embedding_dim() != embedding_dim(model.modality)) {
    throw ShapeError(std::string(modality_name(model.modality)) + " model embedding width " +
                     std::to_string(model.embedding_dim()) + " != " +
                     std::to_string(embedding_dim(model.modality)));
  }
}

void check_features(const ComponentModel& model, const Tensor& f) {
  const std::size_t want_rank = model.sequence_input() ? 2 : 1;
  if (f.rank() != want_rank || f.shape().back() != model.feature_dim() || f.empty()) {
    throw ShapeError(std::string(modality_name(model.modality)) + " model expects " +
                     (want_rank == 2 ? "[T, " : "[") + std::to_string(model.feature_dim()) + "] features, got " +
                     nn::shape_string(f.shape()));
  }
}

nn::Batch stack(const ComponentModel& model, std::span<const Tensor> standardized,
                std::span<const std::size_t> idx) {
  nn::Batch batch;
  if (model.sequence_input()) {
    std::vector<Tensor> seqs;
    seqs.reserve(idx.size());
    for (std::size_t i : idx) seqs.push_back(standardized[i]);
    batch.input = nn::pad_sequences(seqs, &batch.lengths);
  } else {
    const std::size_t d = model.feature_dim();
    batch.input = Tensor({idx.size(), d});
    for (std::size_t b = 0; b < idx.size(); ++b) {
      std::copy_n(standardized[idx[b]].data(), d, batch.input.data() + b * d);
    }
  }
  return batch;
}

std::vector<Tensor> standardize_all(const ComponentModel& model, std::span<const Tensor> features) {
  std::vector<Tensor> out(features.size());
  parallel_for(features.size(), [&](std::size_t i) {
    check_features(model, features[i]);
    out[i] = model.standardizer.apply(features[i]);
  });
  return out;
}

double eer_percent(std::span<const double> scores, std::span<const int> labels) {
  std::vector<eval::ScoredEntry> entries(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw NumericError("training diverged: non-finite validation score");
    entries[i] = {scores[i], labels[i]};
  }
  return eval::compute_eer(entries);
}

}  // namespace

ComponentModel build_prosody_model(std::uint64_t seed) {
  ComponentModel model;
  model.modality = Modality::kProsody;
  model.graph = nn::ModelGraph(seed);
  model.graph.add(nn::MaskLayer{})
      .add(nn::GruLayer{dsp::kProsodyColumns, kProsodyHidden})
      .add(nn::LayerNormLayer{kProsodyHidden})
      .add(nn::DropoutLayer{kProsodyDropout})
      .add(nn::DenseLayer{kProsodyHidden, 1, Activation::kSigmoid});
  model.embedding_layer = 1;
  check_embedding_dim(model);
  return model;
}

ComponentModel build_standin(Modality modality, std::uint64_t seed) {
  ComponentModel model;
  model.modality = modality;
  model.graph = nn::ModelGraph(seed);
  switch (modality) {
    case Modality::kAcoustic:
      model.graph.add(nn::MaskLayer{})
          .add(nn::GruLayer{kAcousticBands, kAcousticHidden})
          .add(nn::DenseLayer{kAcousticHidden, 1, Activation::kSigmoid});
      model.embedding_layer = 1;
      break;
    case Modality::kText:
      model.graph.add(nn::DenseLayer{kTrigramBuckets, kTextHidden, Activation::kRelu})
          .add(nn::DenseLayer{kTextHidden, 1, Activation::kSigmoid});
      model.embedding_layer = 0;
      break;
    case Modality::kAsr:
      model.graph.add(nn::DenseLayer{data::kAsrFeatureDim, kAsrHidden, Activation::kRelu})
          .add(nn::DenseLayer{kAsrHidden, 1, Activation::kSigmoid});
      model.embedding_layer = 0;
      break;
    case Modality::kProsody:
      throw UsageError("prosody is not a stand-in; use build_prosody_model");
  }
  check_embedding_dim(model);
  return model;
}

ComponentModel build_component(Modality modality, std::uint64_t seed) {
  return modality == Modality::kProsody ? build_prosody_model(seed) : build_standin(modality, seed);
}

void ComponentData::validate(const std::string& what) const {
  if (features.empty()) throw DataError(what + ": no utterances");
  if (labels.size() != features.size() || (!uids.empty() && uids.size() != features.size())) {
    throw DataError(what + ": feature/label count mismatch");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw DataError(what + ": bad label for " + (uids.empty() ? std::to_string(i) : uids[i]));
    }
  }
}

std::vector<double> component_scores(const ComponentModel& model, std::span<const Tensor> standardized,
                                     std::size_t chunk) {
  return nn::predict(
      model.graph, standardized.size(),
      [&](std::span<const std::size_t> idx, bool, std::mt19937_64&) { return stack(model, standardized, idx); },
      chunk);
}

nn::TrainHistory train_component(ComponentModel& model, const ComponentData& train, const ComponentData& val,
                                 nn::TrainConfig config) {
  train.validate("component train set");
  val.validate("component validation set");
  for (const auto& f : train.features) check_features(model, f);
  model.standardizer = Standardizer::fit(train.features);

  const std::vector<Tensor> train_x = standardize_all(model, train.features);
  const std::vector<Tensor> val_x = standardize_all(model, val.features);
  const auto positives = static_cast<double>(std::count(train.labels.begin(), train.labels.end(), 1));
  const double negatives = static_cast<double>(train.labels.size()) - positives;
  if (positives == 0.0 || negatives == 0.0) throw DataError("component train set has a single class");
  config.class_weights = {.positive = negatives / positives, .negative = 1.0};

  nn::TrainSet set;
  set.size = train_x.size();
  set.make_batch = [&](std::span<const std::size_t> idx, bool, std::mt19937_64&) {
    nn::Batch batch = stack(model, train_x, idx);
    batch.labels.reserve(idx.size());
    for (std::size_t i : idx) batch.labels.push_back(train.labels[i]);
    return batch;
  };
  const nn::Validator validator = [&](const nn::ModelGraph& graph) {
    ComponentModel view{model.modality, graph, {}, model.embedding_layer};
    return eer_percent(component_scores(view, val_x), val.labels);
  };
  return nn::fit(model.graph, set, validator, config);
}

std::vector<DirectednessOutput> infer_components(const ComponentModel& model, std::span<const Tensor> features,
                                                 std::size_t chunk) {
  if (chunk == 0) throw UsageError("inference chunk must be positive");
  const std::vector<Tensor> x = standardize_all(model, features);
  std::vector<DirectednessOutput> out(x.size());
  const std::size_t chunks = (x.size() + chunk - 1) / chunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t begin = c * chunk;
    const std::size_t end = std::min(x.size(), begin + chunk);
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const nn::Batch batch = stack(model, x, idx);
    nn::ForwardOptions options;
    options.lengths = batch.lengths;
    const nn::ForwardPass pass = nn::forward(model.graph, batch.input, options);
    const Tensor& emb = pass.layer_output(model.embedding_layer);
    const Tensor& score = pass.output();
    const std::size_t d = emb.dim(1);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      auto& o = out[idx[b]];
      o.score = score[b];
      o.embedding.assign(emb.data() + b * d, emb.data() + (b + 1) * d);
    }
  });
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& o = out[i];
    if (!std::isfinite(o.score) || !std::all_of(o.embedding.begin(), o.embedding.end(),
                                                [](double v) { return std::isfinite(v); })) {
      throw NumericError(std::string(modality_name(model.modality)) + " model produced a non-finite output");
    }
  }
  return out;
}

DirectednessOutput infer_component(const ComponentModel& model, const Tensor& features) {
  return infer_components(model, std::span<const Tensor>(&features, 1)).front();
}

double apply_head(const ComponentModel& model, std::span<const double> embedding) {
  if (embedding.size() != model.embedding_dim()) throw ShapeError("apply_head: embedding width mismatch");
  nn::ForwardOptions options;
  options.first_layer = model.embedding_layer + 1;
  const Tensor input({1, embedding.size()}, std::vector<double>(embedding.begin(), embedding.end()));
  return nn::forward(model.graph, input, options).output()[0];
}

nn::ModelFile to_model_file(const ComponentModel& model) {
  nn::ModelFile file{model.graph, {}, {}};
  file.metadata["model"] = "component";
  file.metadata["modality"] = std::string(modality_name(model.modality));
  file.metadata["embedding_layer"] = std::to_string(model.embedding_layer);
  if (model.standardizer.fitted()) {
    const std::size_t d = model.standardizer.dim();
    file.extras.push_back({"standardizer.mean", Tensor({d}, model.standardizer.mean())});
    file.extras.push_back({"standardizer.std", Tensor({d}, model.standardizer.stddev())});
  }
  return file;
}

ComponentModel from_model_file(const nn::ModelFile& file) {
  const auto get = [&](const std::string& key) {
    const auto it = file.metadata.find(key);
    if (it == file.metadata.end()) throw DataError("model file lacks metadata '" + key + "'");
    return it->second;
  };
  if (get("model") != "component") throw DataError("model file is not a component model");
  ComponentModel model;
  model.modality = parse_modality(get("modality"));
  model.graph = file.graph;
  model.embedding_layer = std::stoul(get("embedding_layer"));
  if (model.embedding_layer + 1 >= model.graph.layers().size()) throw DataError("bad embedding layer index");
  const Tensor* mean = nullptr;
  const Tensor* stddev = nullptr;
  for (const auto& e : file.extras) {
    if (e.name == "standardizer.mean") mean = &e.tensor;
    if (e.name == "standardizer.std") stddev = &e.tensor;
  }
  if (mean && stddev) {
    model.standardizer = Standardizer({mean->values().begin(), mean->values().end()},
                                      {stddev->values().begin(), stddev->values().end()});
    if (model.standardizer.dim() != model.feature_dim()) throw DataError("standardizer width mismatch");
  }
  check_embedding_dim(model);
  return model;
}

void save_component(const ComponentModel& model, const std::filesystem::path& path) {
  nn::save_model(to_model_file(model), path);
}

ComponentModel load_component(const std::filesystem::path& path) { return from_model_file(nn::load_model(path)); }

std::vector<data::Record> directedness_records(Modality modality, std::span<const std::string> uids,
                                               std::span<const DirectednessOutput> outputs) {
  if (uids.size() != outputs.size()) throw DataError("directedness export: uid/output count mismatch");
  std::vector<data::Record> records;
  records.reserve(2 * uids.size());
  for (std::size_t i = 0; i < uids.size(); ++i) {
    records.push_back(data::make_record(uids[i], modality, data::RecordKind::kScore, Tensor({1}, outputs[i].score)));
    const auto& e = outputs[i].embedding;
    records.push_back(data::make_record(uids[i], modality, data::RecordKind::kEmbedding,
                                        Tensor({e.size()}, std::vector<double>(e.begin(), e.end()))));
  }
  return records;
}

std::vector<data::Record> sample_records(std::span<const FusionSample> samples, Modality modality) {
  std::vector<data::Record> records;
  records.reserve(2 * samples.size());
  for (const auto& s : samples) {
    DirectednessFeatures f = s[modality];
    if (!f.present) mark_absent(f, modality);
    if (f.embedding.size() != embedding_dim(modality)) {
      throw DataError(std::string(modality_name(modality)) + " embedding of utterance " + s.uid +
                      " has the wrong dimension");
    }
    records.push_back(data::make_record(s.uid, modality, data::RecordKind::kScore, Tensor({1}, f.score)));
    records.push_back(data::make_record(s.uid, modality, data::RecordKind::kEmbedding,
                                        Tensor({f.embedding.size()}, f.embedding)));
    records[records.size() - 2].present = f.present;
    records.back().present = f.present;
  }
  return records;
}

std::filesystem::path directedness_path(const std::filesystem::path& dir, Modality modality) {
  return dir / (std::string(modality_name(modality)) + ".rec");
}

std::vector<FusionSample> ingest_precomputed(
    const data::Manifest& manifest, std::span<const std::pair<Modality, std::vector<data::Record>>> files) {
  std::vector<FusionSample> samples(manifest.records.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i].uid = manifest.records[i].uid;
    samples[i].label = manifest.records[i].label;
    for (Modality m : kAllModalities) mark_absent(samples[i][m], m);
  }
  for (const auto& [modality, records] : files) {
    const std::string m_name(modality_name(modality));
    const std::size_t dim = embedding_dim(modality);
    std::unordered_map<std::string, const data::Record*> scores, embeddings;
    for (const auto& r : records) {
      if (r.modality != modality) {
        throw DataError(m_name + " directedness file holds a " + std::string(modality_name(r.modality)) +
                        " record for utterance " + r.uid);
      }
      auto& index = r.kind == data::RecordKind::kScore ? scores : embeddings;
      if (r.kind == data::RecordKind::kFeatures) {
        throw DataError(m_name + " directedness file holds a raw feature record for utterance " + r.uid);
      }
      if (!index.emplace(r.uid, &r).second) {
        throw DataError(m_name + " directedness file repeats utterance " + r.uid);
      }
    }
    for (auto& sample : samples) {
      const auto s = scores.find(sample.uid);
      const auto e = embeddings.find(sample.uid);
      if (s == scores.end() || e == embeddings.end()) {
        throw DataError(m_name + " directedness file lacks utterance " + sample.uid);
      }
      const data::Record& sr = *s->second;
      const data::Record& er = *e->second;
      if (sr.values.size() != 1) {
        throw DataError(m_name + " score for utterance " + sample.uid + " has " + std::to_string(sr.values.size()) +
                        " values, expected 1");
      }
      if (er.values.size() != dim) {
        throw DataError(m_name + " embedding for utterance " + sample.uid + " has dimension " +
                        std::to_string(er.values.size()) + ", expected " + std::to_string(dim));
      }
      if (!sr.present || !er.present) continue;
      auto& f = sample[modality];
      f.present = true;
      f.score = sr.values[0];
      if (!(f.score >= 0.0 && f.score <= 1.0)) {
        throw DataError(m_name + " score for utterance " + sample.uid + " is outside [0, 1]");
      }
      f.embedding.assign(er.values.begin(), er.values.end());
    }
  }
  return samples;
}

std::vector<FusionSample> ingest_precomputed(const data::Manifest& manifest, const std::filesystem::path& dir,
                                             std::span<const Modality> modalities) {
  std::vector<std::pair<Modality, std::vector<data::Record>>> files;
  for (Modality m : modalities) {
    const auto path = directedness_path(dir, m);
    if (std::filesystem::exists(path)) files.emplace_back(m, data::read_records(path));
  }
  return ingest_precomputed(manifest, files);
}

}  // namespace ddsd::models
