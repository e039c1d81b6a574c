#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ddsd/data/modality.hpp"
#include "ddsd/nn/graph.hpp"
#include "ddsd/nn/serialize.hpp"
#include "ddsd/nn/train.hpp"

namespace ddsd::fusion {

enum class FusionKind : std::uint8_t { kAvg, kSl, kEl };

std::string_view fusion_kind_name(FusionKind kind);  // "avg", "sl", "el"
FusionKind parse_fusion_kind(std::string_view name);

inline constexpr std::size_t kBranchWidth = 128;
inline constexpr std::size_t kTrunkWidth = 128;

struct FusionModel {
  FusionKind kind = FusionKind::kAvg;
  std::vector<Modality> modalities;
  nn::ModelGraph graph;  // empty for AVG

  // Width of one encoded input row: M scores for SL, summed embedding dims
  // for EL, M scores for AVG.
  std::size_t input_width() const;
};

FusionModel build_avg_model(std::vector<Modality> modalities);
// Per modality: inverse softmax -> dense(1->128, tanh); concat -> dense(128M->128,
// ReLU) -> layer norm -> dense(128->1, sigmoid).
FusionModel build_sl_model(std::vector<Modality> modalities, std::uint64_t seed = 0);
// Per modality: dense(dim->128, tanh); then the same trunk as SL.
FusionModel build_el_model(std::vector<Modality> modalities, std::uint64_t seed = 0);
FusionModel build_fusion_model(FusionKind kind, std::vector<Modality> modalities, std::uint64_t seed = 0);

// ln(s / (1 - s)) with s clamped to [1e-6, 1 - 1e-6].
double inverse_softmax(double score);

// Mean of the present scores among `modalities`; DataError if none present.
double fuse_avg(const FusionSample& sample, std::span<const Modality> modalities);

enum class DropoutMode : std::uint8_t {
  // Dropped modalities receive the inference sentinels (-1 / -99999 fill).
  kSentinel,
  // Classic input dropout: dropped embeddings become zeros and kept ones are
  // scaled by 1 / (1 - p); a dropped score becomes 0.5, i.e. a zero logit.
  kZero,
};

struct ModalityDropoutConfig {
  std::array<double, kNumModalities> p{0.3, 0.3, 0.3, 0.3};  // indexed by Modality
  std::uint64_t seed = 0;
  DropoutMode mode = DropoutMode::kSentinel;

  void validate() const;
};

// One Bernoulli draw per modality in canonical order (always four draws).
// No-op unless `train_mode`. Modalities that are already absent stay absent.
void apply_modality_dropout(FusionSample& sample, const ModalityDropoutConfig& config, bool train_mode,
                            std::mt19937_64& rng);

// Encodes samples as graph input rows, writing sentinels for absent
// modalities. Throws ShapeError naming the utterance when a present
// embedding has the wrong width.
nn::Tensor encode_inputs(const FusionModel& model, std::span<const FusionSample> samples,
                         std::span<const std::size_t> indices);

nn::TrainHistory train_fusion(FusionModel& model, std::span<const FusionSample> train,
                              std::span<const FusionSample> val, nn::TrainConfig config,
                              const std::optional<ModalityDropoutConfig>& dropout = std::nullopt);

double infer_fusion(const FusionModel& model, const FusionSample& sample);
std::vector<double> infer_fusion(const FusionModel& model, std::span<const FusionSample> samples,
                                 std::size_t chunk = 512);

nn::ModelFile to_model_file(const FusionModel& model);
FusionModel from_model_file(const nn::ModelFile& file);
void save_fusion(const FusionModel& model, const std::filesystem::path& path);
FusionModel load_fusion(const std::filesystem::path& path);

}  // namespace ddsd::fusion
