#include "ddsd/pipeline/features.hpp"

#include <map>

#include "ddsd/data/records.hpp"
#include "ddsd/dsp/filterbank.hpp"
#include "ddsd/dsp/prosody.hpp"
#include "ddsd/error.hpp"
#include "ddsd/models/text_features.hpp"
#include "ddsd/parallel.hpp"

namespace ddsd::pipeline {

void FeatureStore::put(Modality m, const std::string& uid, nn::Tensor features) {
  tables_[index_of(m)].insert_or_assign(uid, std::move(features));
}

bool FeatureStore::has(Modality m, const std::string& uid) const {
  return tables_[index_of(m)].count(uid) != 0;
}

const nn::Tensor& FeatureStore::get(Modality m, const std::string& uid) const {
  const auto& table = tables_[index_of(m)];
  const auto it = table.find(uid);
  if (it == table.end()) {
    throw DataError("no " + std::string(modality_name(m)) + " features for utterance " + uid);
  }
  return it->second;
}

bool audio_modality(Modality m) { return m == Modality::kProsody || m == Modality::kAcoustic; }

nn::Tensor audio_features(Modality m, const dsp::AudioBuffer& audio) {
  switch (m) {
    case Modality::kProsody: return dsp::assemble_prosody_track(audio);
    case Modality::kAcoustic: return dsp::extract_filterbank(audio);
    default: throw UsageError(std::string(modality_name(m)) + " features do not come from audio");
  }
}

FeatureStore corpus_features(const data::SynthCorpus& corpus, std::span<const Modality> modalities) {
  FeatureStore store;
  const auto& utts = corpus.utterances;
  for (Modality m : modalities) {
    if (m == Modality::kText) continue;
    std::vector<nn::Tensor> out(utts.size());
    parallel_for(utts.size(), [&](std::size_t i) {
      if (m == Modality::kAsr) {
        const auto& f = utts[i].asr_features;
        out[i] = nn::Tensor({f.size()}, f);
      } else {
        out[i] = audio_features(m, utts[i].audio);
      }
    });
    for (std::size_t i = 0; i < utts.size(); ++i) store.put(m, utts[i].record.uid, std::move(out[i]));
  }
  return store;
}

data::Manifest extract_manifest_features(const data::Manifest& manifest, std::span<const Modality> modalities) {
  data::Manifest out = manifest;
  const auto& recs = manifest.records;
  for (Modality m : modalities) {
    if (!audio_modality(m)) continue;
    std::vector<data::Record> records(recs.size());
    parallel_for(recs.size(), [&](std::size_t i) {
      if (recs[i].audio.empty()) throw DataError("utterance " + recs[i].uid + " has no audio");
      const dsp::AudioBuffer audio = dsp::read_wav(manifest.resolve(recs[i].audio));
      records[i] = data::make_record(recs[i].uid, m, data::RecordKind::kFeatures, audio_features(m, audio));
    });
    const std::string rel = "features/" + std::string(modality_name(m)) + ".rec";
    data::write_records(manifest.resolve(rel), records);
    for (auto& r : out.records) r.features[m] = rel;
  }
  return out;
}

FeatureStore load_features(const data::Manifest& manifest, std::span<const Modality> modalities) {
  FeatureStore store;
  for (Modality m : modalities) {
    if (m == Modality::kText) continue;
    std::map<std::string, std::unordered_map<std::string, data::Record>> files;
    for (const auto& r : manifest.records) {
      const auto it = r.features.find(m);
      if (it == r.features.end()) {
        throw DataError("utterance " + r.uid + " has no " + std::string(modality_name(m)) +
                        " features (run extract first)");
      }
      auto file = files.find(it->second);
      if (file == files.end()) {
        const auto path = manifest.resolve(it->second);
        file = files.emplace(it->second, data::index_by_uid(data::read_records(path), path.string())).first;
      }
      const auto rec = file->second.find(r.uid);
      if (rec == file->second.end()) throw DataError(it->second + " lacks utterance " + r.uid);
      if (rec->second.modality != m || rec->second.kind != data::RecordKind::kFeatures) {
        throw DataError(it->second + ": record for utterance " + r.uid + " is not a " +
                        std::string(modality_name(m)) + " feature record");
      }
      store.put(m, r.uid, data::record_tensor(rec->second));
    }
  }
  return store;
}

models::ComponentData component_data(const FeatureStore& store, const data::Manifest& manifest, Modality m) {
  models::ComponentData data;
  data.uids.reserve(manifest.records.size());
  data.features.reserve(manifest.records.size());
  for (const auto& r : manifest.records) {
    data.uids.push_back(r.uid);
    data.labels.push_back(r.label);
    if (m == Modality::kText) {
      data.features.push_back(models::trigram_bag(r.text));
    } else {
      data.features.push_back(store.get(m, r.uid));
    }
  }
  return data;
}

}  // namespace ddsd::pipeline
