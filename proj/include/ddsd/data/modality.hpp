#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ddsd {

enum class Modality : std::uint8_t { kAcoustic = 0, kText = 1, kAsr = 2, kProsody = 3 };

inline constexpr std::size_t kNumModalities = 4;
inline constexpr std::array<Modality, kNumModalities> kAllModalities{
    Modality::kAcoustic, Modality::kText, Modality::kAsr, Modality::kProsody};

// Replacement values written for an absent modality.
inline constexpr double kScoreSentinel = -1.0;
inline constexpr double kEmbeddingSentinel = -99999.0;

std::string_view modality_name(Modality m);
// Accepts the full name or the short form (a, t, asr, p). Throws UsageError.
Modality parse_modality(std::string_view name);
// Parses a comma-separated list such as "a,t,asr".
std::vector<Modality> parse_modality_list(std::string_view list);
std::size_t embedding_dim(Modality m);

inline std::size_t index_of(Modality m) { return static_cast<std::size_t>(m); }

// The score and penultimate embedding one component model exposes to fusion.
struct DirectednessFeatures {
  bool present = false;
  double score = kScoreSentinel;
  std::vector<double> embedding;

  bool operator==(const DirectednessFeatures&) const = default;
};

struct FusionSample {
  std::string uid;
  int label = 0;  // 1 = directed
  std::array<DirectednessFeatures, kNumModalities> modalities;

  DirectednessFeatures& operator[](Modality m) { return modalities[index_of(m)]; }
  const DirectednessFeatures& operator[](Modality m) const { return modalities[index_of(m)]; }
  bool operator==(const FusionSample&) const = default;
};

// Marks a modality absent and writes the sentinel encodings in place.
void mark_absent(DirectednessFeatures& f, Modality m);

}  // namespace ddsd
