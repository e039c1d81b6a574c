#include "ddsd/data/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "ddsd/data/records.hpp"
#include "ddsd/error.hpp"
#include "json.hpp"

namespace ddsd::data {

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrainComp: return "train-comp";
    case Split::kTrainFus: return "train-fus";
    case Split::kValComp: return "val-comp";
    case Split::kValFus: return "val-fus";
    case Split::kTest: return "test";
  }
  return "unknown";
}

Split parse_split(std::string_view name) {
  for (Split s : kAllSplits) {
    if (split_name(s) == name) return s;
  }
  throw UsageError("unknown split '" + std::string(name) + "'");
}

std::string_view label_name(int label) { return label == 1 ? "directed" : "not-directed"; }

int parse_label(std::string_view name) {
  if (name == "directed") return 1;
  if (name == "not-directed") return 0;
  throw DataError("unknown label '" + std::string(name) + "'");
}

Manifest Manifest::filter(Split split) const {
  Manifest out;
  out.base_dir = base_dir;
  for (const auto& r : records) {
    if (r.split == split) out.records.push_back(r);
  }
  return out;
}

std::size_t Manifest::count(int label) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [&](const ManifestRecord& r) { return r.label == label; }));
}

std::string manifest_line(const ManifestRecord& r) {
  nlohmann::ordered_json j;
  j["uid"] = r.uid;
  if (!r.speaker.empty()) j["speaker"] = r.speaker;
  j["label"] = label_name(r.label);
  if (r.split) j["split"] = split_name(*r.split);
  if (!r.audio.empty()) j["audio"] = r.audio;
  if (!r.text.empty()) j["text"] = r.text;
  if (!r.features.empty()) {
    nlohmann::ordered_json f = nlohmann::ordered_json::object();
    for (const auto& [m, path] : r.features) f[std::string(modality_name(m))] = path;
    j["features"] = f;
  }
  return j.dump();
}

ManifestRecord parse_manifest_line(const std::string& line, const std::string& context) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(context + ": " + e.what());
  }
  if (!j.is_object()) throw DataError(context + ": record is not an object");
  auto string_field = [&](const char* key, bool required) -> std::string {
    if (!j.contains(key)) {
      if (required) throw DataError(context + ": missing field '" + key + "'");
      return {};
    }
    if (!j[key].is_string()) throw DataError(context + ": field '" + key + "' must be a string");
    return j[key].get<std::string>();
  };
  ManifestRecord r;
  r.uid = string_field("uid", true);
  if (r.uid.empty()) throw DataError(context + ": empty uid");
  r.speaker = string_field("speaker", false);
  try {
    r.label = parse_label(string_field("label", true));
    if (j.contains("split")) r.split = parse_split(string_field("split", true));
  } catch (const Error& e) {
    throw DataError(context + ": " + e.what());
  }
  r.audio = string_field("audio", false);
  r.text = string_field("text", false);
  if (j.contains("features")) {
    if (!j["features"].is_object()) throw DataError(context + ": 'features' must be an object");
    for (const auto& [key, value] : j["features"].items()) {
      if (!value.is_string()) throw DataError(context + ": feature path for '" + key + "' must be a string");
      try {
        r.features[parse_modality(key)] = value.get<std::string>();
      } catch (const UsageError& e) {
        throw DataError(context + ": " + e.what());
      }
    }
  }
  return r;
}

void validate_manifest(const Manifest& manifest) {
  std::set<std::string> ids;
  std::unordered_map<std::string, Split> speaker_split;
  for (const auto& r : manifest.records) {
    if (!ids.insert(r.uid).second) throw DataError("manifest: duplicate utterance id '" + r.uid + "'");
    if (r.speaker.empty() || !r.split) continue;
    const auto [it, inserted] = speaker_split.emplace(r.speaker, *r.split);
    if (!inserted && it->second != *r.split) {
      throw DataError("manifest: speaker '" + r.speaker + "' appears in both " + std::string(split_name(it->second)) +
                      " and " + std::string(split_name(*r.split)));
    }
  }
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  Manifest m;
  m.base_dir = path.parent_path();
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    m.records.push_back(parse_manifest_line(line, path.string() + ":" + std::to_string(n)));
  }
  validate_manifest(m);
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::string out;
  for (const auto& r : manifest.records) out += manifest_line(r) + "\n";
  write_file(path, out);
}

Manifest split_manifest(const Manifest& manifest, const std::array<double, kNumSplits>& ratios, std::uint64_t seed) {
  double total_ratio = 0.0;
  std::size_t active = 0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw UsageError("split ratios must be nonnegative");
    total_ratio += r;
    active += r > 0.0;
  }
  if (total_ratio <= 0.0) throw UsageError("split ratios sum to zero");

  // Groups in first-appearance order, so the result depends only on the seed.
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& r = manifest.records[i];
    const std::string key = r.speaker.empty() ? "utt:" + r.uid : "spk:" + r.speaker;
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(i);
  }
  if (order.size() < active) {
    throw DataError("split_manifest: " + std::to_string(order.size()) + " speaker groups cannot fill " +
                    std::to_string(active) + " disjoint splits");
  }
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  Manifest out = manifest;
  std::array<double, kNumSplits> filled{};
  const double n = static_cast<double>(manifest.records.size());
  for (std::size_t g = 0; g < order.size(); ++g) {
    std::size_t target = 0;
    double best_deficit = -1e300;
    // The first groups go one per active split so none ends up empty.
    const bool seeding = g < active;
    for (std::size_t s = 0; s < kNumSplits; ++s) {
      if (ratios[s] <= 0.0) continue;
      if (seeding && filled[s] > 0.0) continue;
      const double deficit = ratios[s] / total_ratio * n - filled[s];
      if (deficit > best_deficit) {
        best_deficit = deficit;
        target = s;
      }
    }
    for (std::size_t idx : groups[order[g]]) out.records[idx].split = kAllSplits[target];
    filled[target] += static_cast<double>(groups[order[g]].size());
  }
  return out;
}

}  // namespace ddsd::data
