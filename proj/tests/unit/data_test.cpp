#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <set>

#include "ddsd/data/manifest.hpp"
#include "ddsd/data/records.hpp"
#include "ddsd/data/synth.hpp"
#include "ddsd/dsp/audio.hpp"
#include "ddsd/error.hpp"

using namespace ddsd;
using namespace ddsd::data;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ddsd_data_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string error_of(const auto& fn) {
  try {
    fn();
  } catch (const DataError& e) {
    return e.what();
  }
  return {};
}

Manifest speaker_manifest(std::size_t speakers, std::size_t per_speaker) {
  Manifest m;
  for (std::size_t s = 0; s < speakers; ++s) {
    for (std::size_t k = 0; k < per_speaker; ++k) {
      ManifestRecord r;
      r.uid = "u" + std::to_string(s) + "_" + std::to_string(k);
      r.speaker = "spk" + std::to_string(s);
      r.label = static_cast<int>((s + k) % 3 == 0);
      m.records.push_back(r);
    }
  }
  return m;
}

SynthConfig tiny_config(std::uint64_t seed) {
  SynthConfig c;
  c.scale = 0.004;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("a 128-dim embedding record round-trips bit for bit") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  nn::Tensor e({128});
  for (auto& v : e.values()) v = g(rng);
  const Record r = make_record("utt-7", Modality::kProsody, RecordKind::kEmbedding, e);
  const std::string bytes = encode_records(std::span<const Record>(&r, 1));
  const auto back = decode_records(bytes, "mem");
  REQUIRE(back.size() == 1);
  CHECK(back[0] == r);
  for (std::size_t i = 0; i < 128; ++i) {
    CHECK(std::bit_cast<std::uint32_t>(back[0].values[i]) == std::bit_cast<std::uint32_t>(r.values[i]));
  }
  CHECK(encode_records(back) == bytes);
  // Stored as float32: the tensor view is the float rounding of the input.
  CHECK(record_tensor(back[0])[5] == static_cast<double>(static_cast<float>(e[5])));
}

TEST_CASE("damaged record files raise errors with the byte offset") {
  const Record a = make_record("a", Modality::kAsr, RecordKind::kFeatures, nn::Tensor({8}, 0.25));
  const Record b = make_record("b", Modality::kAsr, RecordKind::kFeatures, nn::Tensor({8}, 0.5));
  const std::vector<Record> both{a, b};
  const std::string bytes = encode_records(both);
  const std::size_t first = encode_records(std::span<const Record>(&a, 1)).size();

  const std::string truncated = bytes.substr(0, bytes.size() - 6);
  const std::string msg = error_of([&] { decode_records(truncated, "feat.rec"); });
  CHECK(msg.find("feat.rec") != std::string::npos);
  CHECK(msg.find("byte offset") != std::string::npos);

  std::string bad_magic = bytes;
  bad_magic[first] = 'X';
  CHECK(error_of([&] { decode_records(bad_magic, "f"); }).find("byte offset " + std::to_string(first)) !=
        std::string::npos);

  std::string bad_version = bytes;
  bad_version[4] = 9;
  CHECK(error_of([&] { decode_records(bad_version, "f"); }).find("version") != std::string::npos);

  CHECK_THROWS_AS(index_by_uid({a, a}, "f"), DataError);
  CHECK(decode_records("", "empty").empty());
}

TEST_CASE("an absent-prosody record keeps its flag and sentinel fill") {
  DirectednessFeatures f;
  f.present = true;
  f.embedding.assign(128, 0.5);
  mark_absent(f, Modality::kProsody);
  Record emb = make_record("x", Modality::kProsody, RecordKind::kEmbedding,
                           nn::Tensor({128}, std::vector<double>(f.embedding)));
  emb.present = false;
  Record score = make_record("x", Modality::kProsody, RecordKind::kScore, nn::Tensor({1}, f.score));
  score.present = false;

  const fs::path dir = scratch_dir("absent");
  const std::vector<Record> records{score, emb};
  write_records(dir / "p.rec", records);
  const auto back = read_records(dir / "p.rec");
  REQUIRE(back.size() == 2);
  CHECK_FALSE(back[0].present);
  CHECK(back[0].values[0] == -1.0f);
  CHECK_FALSE(back[1].present);
  CHECK(back[1].values.size() == 128);
  for (float v : back[1].values) CHECK(v == -99999.0f);
  fs::remove_all(dir);
}

TEST_CASE("manifest lines round-trip and report their location") {
  ManifestRecord r;
  r.uid = "test-00012";
  r.speaker = "spk3";
  r.label = 1;
  r.split = Split::kValFus;
  r.audio = "audio/test-00012.wav";
  r.text = "set a timer";
  r.features[Modality::kAsr] = "features/asr.rec";
  CHECK(parse_manifest_line(manifest_line(r), "m:1") == r);

  ManifestRecord bare;
  bare.uid = "b";
  CHECK(parse_manifest_line(manifest_line(bare), "m:1") == bare);

  const std::string msg = error_of([] { parse_manifest_line(R"({"uid": "q", "label": "maybe"})", "m.jsonl:4"); });
  CHECK(msg.find("m.jsonl:4") != std::string::npos);
  CHECK_THROWS_AS(parse_manifest_line("{not json", "m:1"), DataError);
  CHECK_THROWS_AS(parse_manifest_line(R"({"label": "directed"})", "m:1"), DataError);

  const fs::path dir = scratch_dir("manifest");
  Manifest m;
  m.records = {r, bare};
  write_manifest(dir / "manifest.jsonl", m);
  const Manifest back = read_manifest(dir / "manifest.jsonl");
  CHECK(back.records == m.records);
  CHECK(back.base_dir == dir);
  fs::remove_all(dir);
}

TEST_CASE("manifest validation rejects shared ids and speakers") {
  Manifest m = speaker_manifest(2, 2);
  m.records[0].split = Split::kTrainComp;
  m.records[1].split = Split::kTest;  // same speaker as record 0
  CHECK_THROWS_AS(validate_manifest(m), DataError);
  m.records[1].split = Split::kTrainComp;
  CHECK_NOTHROW(validate_manifest(m));
  m.records[3].uid = m.records[2].uid;
  CHECK_THROWS_AS(validate_manifest(m), DataError);
}

TEST_CASE("split_manifest keeps speakers and utterances disjoint") {
  const std::array<double, kNumSplits> ratios{0.35, 0.21, 0.15, 0.09, 0.20};
  const Manifest m = speaker_manifest(60, 7);
  const Manifest split = split_manifest(m, ratios, 11);
  CHECK_NOTHROW(validate_manifest(split));
  std::map<std::string, Split> speaker_split;
  std::array<std::size_t, kNumSplits> counts{};
  for (const auto& r : split.records) {
    REQUIRE(r.split.has_value());
    const auto [it, inserted] = speaker_split.emplace(r.speaker, *r.split);
    CHECK(it->second == *r.split);
    ++counts[static_cast<std::size_t>(*r.split)];
  }
  for (std::size_t s = 0; s < kNumSplits; ++s) {
    CHECK(std::abs(static_cast<double>(counts[s]) / 420.0 - ratios[s]) < 0.04);
  }
  CHECK(split_manifest(m, ratios, 11).records == split.records);
  CHECK(split_manifest(m, ratios, 12).records != split.records);

  CHECK_THROWS_AS(split_manifest(speaker_manifest(3, 50), ratios, 1), DataError);

  // Without speaker ids every utterance is its own group.
  Manifest anon = speaker_manifest(1, 40);
  for (auto& r : anon.records) r.speaker.clear();
  const Manifest anon_split = split_manifest(anon, ratios, 2);
  std::set<Split> used;
  for (const auto& r : anon_split.records) used.insert(*r.split);
  CHECK(used.size() == kNumSplits);
}

TEST_CASE("default split sizes follow the reference ratios") {
  SynthConfig c;
  const auto tc = c.split_counts(Split::kTrainComp);
  CHECK(tc[0] == 520);
  CHECK(tc[1] == 3000);
  CHECK(static_cast<double>(tc[1]) / tc[0] == doctest::Approx(30000.0 / 5200.0).epsilon(0.01));
  const auto test = c.split_counts(Split::kTest);
  CHECK(test[0] == 310);
  CHECK(test[1] == 1700);

  c.imbalance = 1.0;
  const auto balanced = c.split_counts(Split::kValFus);
  CHECK(balanced[0] == balanced[1]);

  SynthConfig bad;
  bad.correlation = 1.5;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = {};
  bad.separability[0] = -1.0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("the generator is deterministic and speaker-disjoint") {
  const SynthCorpus a = generate_synthetic_corpus(tiny_config(5));
  const SynthCorpus b = generate_synthetic_corpus(tiny_config(5));
  const SynthCorpus c = generate_synthetic_corpus(tiny_config(6));
  REQUIRE(a.utterances.size() == b.utterances.size());
  for (std::size_t i = 0; i < a.utterances.size(); ++i) {
    CHECK(a.utterances[i].record == b.utterances[i].record);
    CHECK(dsp::encode_wav(a.utterances[i].audio) == dsp::encode_wav(b.utterances[i].audio));
    CHECK(a.utterances[i].asr_features == b.utterances[i].asr_features);
  }
  CHECK(a.utterances[0].audio.samples != c.utterances[0].audio.samples);

  const Manifest m = corpus_manifest(a);
  CHECK_NOTHROW(validate_manifest(m));
  for (Split s : kAllSplits) {
    const Manifest part = m.filter(s);
    const auto counts = tiny_config(5).split_counts(s);
    CHECK(part.count(1) == counts[0]);
    CHECK(part.count(0) == counts[1]);
  }
  for (const auto& u : a.utterances) {
    CHECK(u.asr_features.size() == kAsrFeatureDim);
    CHECK_FALSE(u.record.text.empty());
    const double seconds = static_cast<double>(u.audio.size()) / u.audio.sample_rate;
    CHECK(seconds >= 0.5 - 1e-3);
    CHECK(seconds <= 0.8 + 1e-3);
    CHECK(std::all_of(u.audio.samples.begin(), u.audio.samples.end(),
                      [](double v) { return v * 32768.0 == std::round(v * 32768.0); }));
  }
}

TEST_CASE("latents carry the configured class separation and correlation") {
  SynthConfig c;
  c.scale = 0.03;
  c.seed = 9;
  c.min_duration = c.max_duration = 0.1;
  const SynthCorpus corpus = generate_synthetic_corpus(c);
  std::array<double, kNumModalities> mean1{}, mean0{};
  double n1 = 0, n0 = 0;
  for (const auto& u : corpus.utterances) {
    auto& mean = u.latents.label == 1 ? mean1 : mean0;
    (u.latents.label == 1 ? n1 : n0) += 1;
    for (std::size_t k = 0; k < kNumModalities; ++k) mean[k] += u.latents.z[k];
  }
  for (std::size_t k = 0; k < kNumModalities; ++k) {
    const double gap = mean1[k] / n1 - mean0[k] / n0;
    // Standard error of a two-sample mean difference with unit variance.
    const double se = std::sqrt(1.0 / n1 + 1.0 / n0);
    CHECK(std::abs(gap - c.separability[k]) < 4.0 * se);
  }
  // Within-class correlation between two modalities equals rho.
  double sxy = 0, sxx = 0, syy = 0;
  for (const auto& u : corpus.utterances) {
    if (u.latents.label != 0) continue;
    const double x = u.latents.z[0] + 0.5 * c.separability[0];
    const double y = u.latents.z[1] + 0.5 * c.separability[1];
    sxy += x * y;
    sxx += x * x;
    syy += y * y;
  }
  const double r = sxy / std::sqrt(sxx * syy);
  CHECK(std::abs(r - c.correlation) < 4.0 * (1.0 - c.correlation * c.correlation) / std::sqrt(n0));
  // ASR feature 5 tracks the nuisance with the configured visibility.
  double sq = 0, qq = 0, ee = 0;
  for (const auto& u : corpus.utterances) {
    sq += u.asr_features[5] * u.latents.nuisance;
    qq += u.asr_features[5] * u.asr_features[5];
    ee += u.latents.nuisance * u.latents.nuisance;
  }
  CHECK(sq / std::sqrt(qq * ee) == doctest::Approx(c.nuisance_visibility).epsilon(0.03));
}

TEST_CASE("write_corpus lays out audio, features and manifest") {
  const SynthCorpus corpus = generate_synthetic_corpus(tiny_config(2));
  const fs::path dir = scratch_dir("corpus");
  write_corpus(corpus, dir);
  const Manifest m = read_manifest(dir / "manifest.jsonl");
  REQUIRE(m.records.size() == corpus.utterances.size());
  const auto asr = index_by_uid(read_records(dir / "features" / "asr.rec"), "asr");
  for (std::size_t i = 0; i < m.records.size(); i += 17) {
    const auto& u = corpus.utterances[i];
    CHECK(m.records[i] == u.record);
    CHECK(dsp::read_wav(m.resolve(m.records[i].audio)).samples == u.audio.samples);
    const nn::Tensor t = record_tensor(asr.at(u.record.uid));
    CHECK(std::vector<double>(t.values().begin(), t.values().end()) == u.asr_features);
  }
  fs::remove_all(dir);
}
