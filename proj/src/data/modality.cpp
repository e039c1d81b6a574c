#include "ddsd/data/modality.hpp"

#include "ddsd/error.hpp"

namespace ddsd {

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::kAcoustic: return "acoustic";
    case Modality::kText: return "text";
    case Modality::kAsr: return "asr";
    case Modality::kProsody: return "prosody";
  }
  return "unknown";
}

Modality parse_modality(std::string_view name) {
  if (name == "acoustic" || name == "a") return Modality::kAcoustic;
  if (name == "text" || name == "t") return Modality::kText;
  if (name == "asr") return Modality::kAsr;
  if (name == "prosody" || name == "p") return Modality::kProsody;
  throw UsageError("unknown modality '" + std::string(name) + "'");
}

std::vector<Modality> parse_modality_list(std::string_view list) {
  std::vector<Modality> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto comma = list.find(',', start);
    const auto end = comma == std::string_view::npos ? list.size() : comma;
    const auto item = list.substr(start, end - start);
    if (!item.empty()) {
      const Modality m = parse_modality(item);
      for (Modality seen : out) {
        if (seen == m) throw UsageError("modality '" + std::string(item) + "' listed twice");
      }
      out.push_back(m);
    }
    start = end + 1;
  }
  if (out.empty()) throw UsageError("empty modality list");
  return out;
}

std::size_t embedding_dim(Modality m) {
  switch (m) {
    case Modality::kAcoustic: return 256;
    case Modality::kText: return 128;
    case Modality::kAsr: return 16;
    case Modality::kProsody: return 128;
  }
  return 0;
}

void mark_absent(DirectednessFeatures& f, Modality m) {
  f.present = false;
  f.score = kScoreSentinel;
  f.embedding.assign(embedding_dim(m), kEmbeddingSentinel);
}

}  // namespace ddsd
