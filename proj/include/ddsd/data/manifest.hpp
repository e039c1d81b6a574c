#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ddsd/data/modality.hpp"

namespace ddsd::data {

enum class Split : std::uint8_t { kTrainComp = 0, kTrainFus, kValComp, kValFus, kTest };
inline constexpr std::size_t kNumSplits = 5;
inline constexpr std::array<Split, kNumSplits> kAllSplits{Split::kTrainComp, Split::kTrainFus, Split::kValComp,
                                                         Split::kValFus, Split::kTest};

std::string_view split_name(Split s);
Split parse_split(std::string_view name);

std::string_view label_name(int label);  // "directed" / "not-directed"
int parse_label(std::string_view name);

struct ManifestRecord {
  std::string uid;
  std::string speaker;  // empty when unknown
  int label = 0;        // 1 = directed
  std::optional<Split> split;
  std::string audio;  // relative to the manifest directory; empty when absent
  std::string text;   // transcript; empty when absent
  std::map<Modality, std::string> features;  // record files, relative paths

  bool operator==(const ManifestRecord&) const = default;
};

// Line-delimited JSON, one record per line. Paths inside records are resolved
// against base_dir.
struct Manifest {
  std::vector<ManifestRecord> records;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& relative) const { return base_dir / relative; }
  Manifest filter(Split split) const;
  std::size_t count(int label) const;
};

std::string manifest_line(const ManifestRecord& record);
ManifestRecord parse_manifest_line(const std::string& line, const std::string& context);

// Throws DataError on duplicate ids or a speaker shared between splits.
void validate_manifest(const Manifest& manifest);

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

// Assigns every record a split so that speakers (or utterances, when no
// speaker ids exist) never straddle two splits. Ratios are relative utterance
// shares; groups are shuffled by seed and dealt greedily to the split that is
// furthest below its target. Throws DataError when there are fewer groups than
// splits with a nonzero ratio.
Manifest split_manifest(const Manifest& manifest, const std::array<double, kNumSplits>& ratios, std::uint64_t seed);

}  // namespace ddsd::data
