#include "ddsd/fusion/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ddsd/error.hpp"
#include "ddsd/eval/metrics.hpp"
#include "ddsd/parallel.hpp"

namespace ddsd::fusion {

namespace {

using nn::Activation;
using nn::Tensor;

void check_modalities(const std::vector<Modality>& modalities) {
  if (modalities.empty()) throw UsageError("fusion needs at least one modality");
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    for (std::size_t j = i + 1; j < modalities.size(); ++j) {
      if (modalities[i] == modalities[j]) throw UsageError("fusion modality listed twice");
    }
  }
}

void add_trunk(nn::ModelGraph& graph, std::size_t branches) {
  graph.add(nn::DenseLayer{kBranchWidth * branches, kTrunkWidth, Activation::kRelu})
      .add(nn::LayerNormLayer{kTrunkWidth})
      .add(nn::DenseLayer{kTrunkWidth, 1, Activation::kSigmoid});
}

std::string join_modalities(const std::vector<Modality>& modalities) {
  std::string out;
  for (Modality m : modalities) {
    if (!out.empty()) out += ',';
    out += modality_name(m);
  }
  return out;
}

double eer_percent(std::span<const double> scores, std::span<const FusionSample> samples) {
  std::vector<eval::ScoredEntry> entries(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw NumericError("training diverged: non-finite validation score");
    entries[i] = {scores[i], samples[i].label};
  }
  return eval::compute_eer(entries);
}

}  // namespace

std::string_view fusion_kind_name(FusionKind kind) {
  switch (kind) {
    case FusionKind::kAvg: return "avg";
    case FusionKind::kSl: return "sl";
    case FusionKind::kEl: return "el";
  }
  return "unknown";
}

FusionKind parse_fusion_kind(std::string_view name) {
  if (name == "avg" || name == "AVG") return FusionKind::kAvg;
  if (name == "sl" || name == "SL") return FusionKind::kSl;
  if (name == "el" || name == "EL") return FusionKind::kEl;
  throw UsageError("unknown fusion kind '" + std::string(name) + "' (expected avg, sl or el)");
}

std::size_t FusionModel::input_width() const {
  if (kind != FusionKind::kEl) return modalities.size();
  std::size_t w = 0;
  for (Modality m : modalities) w += embedding_dim(m);
  return w;
}

FusionModel build_avg_model(std::vector<Modality> modalities) {
  check_modalities(modalities);
  return {FusionKind::kAvg, std::move(modalities), nn::ModelGraph(0)};
}

FusionModel build_sl_model(std::vector<Modality> modalities, std::uint64_t seed) {
  check_modalities(modalities);
  const std::size_t m = modalities.size();
  FusionModel model{FusionKind::kSl, std::move(modalities), nn::ModelGraph(seed)};
  model.graph.add(nn::InverseSoftmaxLayer{m})
      .add(nn::BranchDenseLayer{std::vector<std::size_t>(m, 1), kBranchWidth, Activation::kTanh});
  add_trunk(model.graph, m);
  return model;
}

FusionModel build_el_model(std::vector<Modality> modalities, std::uint64_t seed) {
  check_modalities(modalities);
  std::vector<std::size_t> dims;
  for (Modality m : modalities) dims.push_back(embedding_dim(m));
  FusionModel model{FusionKind::kEl, std::move(modalities), nn::ModelGraph(seed)};
  model.graph.add(nn::BranchDenseLayer{dims, kBranchWidth, Activation::kTanh});
  add_trunk(model.graph, dims.size());
  return model;
}

FusionModel build_fusion_model(FusionKind kind, std::vector<Modality> modalities, std::uint64_t seed) {
  switch (kind) {
    case FusionKind::kAvg: return build_avg_model(std::move(modalities));
    case FusionKind::kSl: return build_sl_model(std::move(modalities), seed);
    case FusionKind::kEl: return build_el_model(std::move(modalities), seed);
  }
  throw UsageError("unknown fusion kind");
}

double inverse_softmax(double score) {
  const double s = std::clamp(score, nn::kInverseSoftmaxClamp, 1.0 - nn::kInverseSoftmaxClamp);
  return std::log(s / (1.0 - s));
}

double fuse_avg(const FusionSample& sample, std::span<const Modality> modalities) {
  double sum = 0.0;
  std::size_t n = 0;
  for (Modality m : modalities) {
    if (!sample[m].present) continue;
    sum += sample[m].score;
    ++n;
  }
  if (n == 0) throw DataError("AVG fusion: every modality is absent for utterance " + sample.uid);
  return sum / static_cast<double>(n);
}

void ModalityDropoutConfig::validate() const {
  for (double v : p) {
    if (!(v >= 0.0 && v < 1.0)) throw UsageError("modality dropout probabilities must lie in [0, 1)");
  }
}

void apply_modality_dropout(FusionSample& sample, const ModalityDropoutConfig& config, bool train_mode,
                            std::mt19937_64& rng) {
  if (!train_mode) return;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Modality m : kAllModalities) {
    const double p = config.p[index_of(m)];
    const bool drop = unit(rng) < p;
    auto& f = sample[m];
    if (!f.present) continue;
    if (config.mode == DropoutMode::kSentinel) {
      if (drop) mark_absent(f, m);
    } else if (drop) {
      f.score = 0.5;
      std::fill(f.embedding.begin(), f.embedding.end(), 0.0);
    } else {
      for (double& v : f.embedding) v /= 1.0 - p;
    }
  }
}

Tensor encode_inputs(const FusionModel& model, std::span<const FusionSample> samples,
                     std::span<const std::size_t> indices) {
  const std::size_t width = model.input_width();
  Tensor out({indices.size(), width});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const FusionSample& s = samples[indices[b]];
    double* row = out.data() + b * width;
    for (Modality m : model.modalities) {
      const auto& f = s[m];
      if (model.kind != FusionKind::kEl) {
        if (f.present && !(f.score >= 0.0 && f.score <= 1.0)) {
          throw DataError(std::string(modality_name(m)) + " score of utterance " + s.uid + " is outside [0, 1]");
        }
        *row++ = f.present ? f.score : kScoreSentinel;
        continue;
      }
      const std::size_t dim = embedding_dim(m);
      if (!f.present) {
        row = std::fill_n(row, dim, kEmbeddingSentinel);
        continue;
      }
      if (f.embedding.size() != dim) {
        throw ShapeError(std::string(modality_name(m)) + " embedding of utterance " + s.uid + " has dimension " +
                         std::to_string(f.embedding.size()) + ", expected " + std::to_string(dim));
      }
      row = std::copy(f.embedding.begin(), f.embedding.end(), row);
    }
  }
  return out;
}

std::vector<double> infer_fusion(const FusionModel& model, std::span<const FusionSample> samples,
                                 std::size_t chunk) {
  std::vector<double> out(samples.size());
  if (model.kind == FusionKind::kAvg) {
    for (std::size_t i = 0; i < samples.size(); ++i) out[i] = fuse_avg(samples[i], model.modalities);
    return out;
  }
  if (chunk == 0) throw UsageError("inference chunk must be positive");
  const std::size_t chunks = (samples.size() + chunk - 1) / chunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t begin = c * chunk;
    const std::size_t end = std::min(samples.size(), begin + chunk);
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const Tensor y = nn::forward(model.graph, encode_inputs(model, samples, idx)).output();
    std::copy(y.values().begin(), y.values().end(), out.begin() + static_cast<std::ptrdiff_t>(begin));
  });
  for (double v : out) {
    if (!std::isfinite(v)) throw NumericError("fusion model produced a non-finite output");
  }
  return out;
}

double infer_fusion(const FusionModel& model, const FusionSample& sample) {
  return infer_fusion(model, std::span<const FusionSample>(&sample, 1)).front();
}

nn::TrainHistory train_fusion(FusionModel& model, std::span<const FusionSample> train,
                              std::span<const FusionSample> val, nn::TrainConfig config,
                              const std::optional<ModalityDropoutConfig>& dropout) {
  if (model.kind == FusionKind::kAvg) throw UsageError("AVG fusion has no parameters to train");
  if (train.empty()) throw DataError("fusion train set is empty");
  if (val.empty()) throw DataError("fusion validation set is empty");
  if (dropout) dropout->validate();
  // Fail on malformed inputs before any training.
  {
    std::vector<std::size_t> all(train.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    (void)encode_inputs(model, train, all);
  }
  double positives = 0.0;
  for (const auto& s : train) {
    if (s.label != 0 && s.label != 1) throw DataError("bad label for utterance " + s.uid);
    positives += s.label;
  }
  const double negatives = static_cast<double>(train.size()) - positives;
  if (positives == 0.0 || negatives == 0.0) throw DataError("fusion train set has a single class");
  config.class_weights = {.positive = negatives / positives, .negative = 1.0};

  std::mt19937_64 md_rng(dropout ? dropout->seed : 0);
  std::vector<FusionSample> scratch;
  nn::TrainSet set;
  set.size = train.size();
  set.make_batch = [&](std::span<const std::size_t> idx, bool train_mode, std::mt19937_64&) {
    nn::Batch batch;
    if (dropout) {
      scratch.assign(idx.size(), {});
      std::vector<std::size_t> local(idx.size());
      for (std::size_t b = 0; b < idx.size(); ++b) {
        scratch[b] = train[idx[b]];
        apply_modality_dropout(scratch[b], *dropout, train_mode, md_rng);
        local[b] = b;
      }
      batch.input = encode_inputs(model, scratch, local);
    } else {
      batch.input = encode_inputs(model, train, idx);
    }
    for (std::size_t i : idx) batch.labels.push_back(train[i].label);
    return batch;
  };
  const nn::Validator validator = [&](const nn::ModelGraph& graph) {
    FusionModel view{model.kind, model.modalities, graph};
    return eer_percent(infer_fusion(view, val), val);
  };
  return nn::fit(model.graph, set, validator, config);
}

nn::ModelFile to_model_file(const FusionModel& model) {
  nn::ModelFile file{model.graph, {}, {}};
  file.metadata["model"] = "fusion";
  file.metadata["kind"] = std::string(fusion_kind_name(model.kind));
  file.metadata["modalities"] = join_modalities(model.modalities);
  return file;
}

FusionModel from_model_file(const nn::ModelFile& file) {
  const auto get = [&](const std::string& key) {
    const auto it = file.metadata.find(key);
    if (it == file.metadata.end()) throw DataError("model file lacks metadata '" + key + "'");
    return it->second;
  };
  if (get("model") != "fusion") throw DataError("model file is not a fusion model");
  FusionModel model{parse_fusion_kind(get("kind")), parse_modality_list(get("modalities")), file.graph};
  // Confirm the stored graph matches the declared architecture.
  const FusionModel reference = build_fusion_model(model.kind, model.modalities, 0);
  const auto& a = model.graph.layers();
  const auto& b = reference.graph.layers();
  bool same = a.size() == b.size();
  for (std::size_t i = 0; same && i < a.size(); ++i) same = nn::layer_kind(a[i]) == nn::layer_kind(b[i]);
  if (!same || (model.kind != FusionKind::kAvg && model.graph.input_width() != model.input_width())) {
    throw DataError("fusion model graph does not match its declared kind and modalities");
  }
  return model;
}

void save_fusion(const FusionModel& model, const std::filesystem::path& path) {
  nn::save_model(to_model_file(model), path);
}

FusionModel load_fusion(const std::filesystem::path& path) { return from_model_file(nn::load_model(path)); }

}  // namespace ddsd::fusion
