#include "ddsd/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "ddsd/data/records.hpp"
#include "ddsd/dsp/audio.hpp"
#include "ddsd/error.hpp"
#include "ddsd/parallel.hpp"

namespace ddsd::data {

namespace {

constexpr int kRate = dsp::kDefaultSampleRate;

constexpr const char* kDirectedWords[] = {
    "set",   "timer",    "alarm", "play",   "music",    "call",        "weather",    "remind",
    "turn",  "lights",   "volume", "text",  "message",  "navigate",    "open",       "stop",
    "pause", "skip",     "what's", "temperature", "schedule", "add", "list",       "minutes",
    "directions", "song", "forecast", "dim", "brightness", "read"};
constexpr const char* kChatWords[] = {
    "yeah",  "honestly", "lunch",  "guess",   "anyway", "kidding", "mom",       "totally",
    "dinner", "funny",   "gonna",  "whatever", "okay",  "really",  "maybe",     "like",
    "friend", "weird",   "office", "laugh",   "sorry",  "dude",    "seriously", "basically",
    "sure",  "nice",     "hungry", "tired",   "cool",   "wow"};
constexpr const char* kNeutralWords[] = {
    "the", "a",  "to",  "for", "and", "it",     "is",   "today", "tomorrow", "that",
    "this", "my", "in", "on",  "at",  "me",     "you",  "we",    "now",      "please",
    "some", "of", "with", "from", "up", "down", "there", "here", "then",     "just"};

// Word-choice sharpness: P(word group) is proportional to exp(kTextBeta * valence * z).
constexpr double kTextBeta = 0.8;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t domain, std::uint64_t a, std::uint64_t b) {
  return std::mt19937_64(splitmix(splitmix(splitmix(seed ^ domain) + a) + b));
}

struct Speaker {
  double base_f0;
  double formant_scale;
};

Speaker make_speaker(std::uint64_t seed, std::size_t split, std::size_t index) {
  auto rng = stream(seed, 0x5B, split, index);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return {100.0 * std::exp(u(rng) * std::log(230.0 / 100.0)), 0.9 + 0.22 * u(rng)};
}

// Two-pole resonator at centre frequency f with bandwidth bw, unit DC-free gain.
void resonate(std::vector<double>& x, double f, double bw) {
  const double r = std::exp(-std::numbers::pi * bw / kRate);
  const double c = 2.0 * r * std::cos(2.0 * std::numbers::pi * f / kRate);
  double y1 = 0.0, y2 = 0.0;
  for (double& v : x) {
    const double y = (1.0 - r) * v + c * y1 - r * r * y2;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

dsp::AudioBuffer synth_audio(const SynthConfig& cfg, const SynthLatents& lat, const Speaker& spk,
                             std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };

  const double duration = uniform(cfg.min_duration, cfg.max_duration);
  const auto n = static_cast<std::size_t>(duration * kRate);
  std::vector<double> speech(n, 0.0);

  const double zp = lat.z[index_of(Modality::kProsody)];
  const double za = lat.z[index_of(Modality::kAcoustic)];
  // Directed speech: flatter intonation, steadier cycles, fewer pauses.
  const double pitch_depth = 0.10 * std::exp(-0.35 * zp);
  const double jitter = 0.010 * std::exp(-0.45 * zp);
  const double shimmer = 0.07 * std::exp(-0.45 * zp);
  const double pause_prob = 1.0 / (1.0 + std::exp(1.2 + 0.7 * zp));
  const double level = std::pow(10.0, uniform(-24.0, -16.0) / 20.0);

  const double lead = uniform(0.04, 0.09);
  const double end = duration - uniform(0.04, 0.09);
  const double pulse_sigma = 0.00025 * kRate;
  double t = lead;
  double f_start = spk.base_f0 * std::exp(pitch_depth * g(rng));
  bool first = true;
  while (true) {
    double syllable = uniform(0.09, 0.16);
    if (t + syllable > end) {
      if (!first) break;
      syllable = end - t;
    }
    first = false;
    const double f_end = spk.base_f0 * std::exp(pitch_depth * g(rng));
    const auto len = static_cast<std::size_t>(syllable * kRate);
    std::vector<double> src(len + 64, 0.0);
    for (double tau = 0.002; tau < syllable;) {
      const double frac = tau / syllable;
      const double f = std::exp(std::log(f_start) + frac * (std::log(f_end) - std::log(f_start)));
      const double ramp = std::min({1.0, tau / 0.02, (syllable - tau) / 0.02});
      const double env = 0.5 - 0.5 * std::cos(std::numbers::pi * std::max(0.0, ramp));
      const double amp = env * std::max(0.1, 1.0 + shimmer * g(rng));
      const double centre = tau * kRate;
      const auto lo = static_cast<long>(std::max(0.0, centre - 6 * pulse_sigma));
      const auto hi = std::min(static_cast<long>(src.size()) - 1, static_cast<long>(centre + 6 * pulse_sigma));
      for (long i = lo; i <= hi; ++i) {
        const double d = (i - centre) / pulse_sigma;
        src[static_cast<std::size_t>(i)] += amp * std::exp(-0.5 * d * d);
      }
      const double period = std::clamp((1.0 / f) * (1.0 + jitter * g(rng)), 1.0 / 380.0, 1.0 / 75.0);
      tau += period;
    }
    const double s = spk.formant_scale;
    resonate(src, s * std::clamp(550.0 + 80.0 * za + 80.0 * g(rng), 250.0, 1000.0), 80.0);
    resonate(src, s * std::clamp(1500.0 + 180.0 * za + 200.0 * g(rng), 900.0, 2600.0), 100.0);
    resonate(src, s * 2500.0, 150.0);
    double energy = 0.0;
    for (double v : src) energy += v * v;
    const double gain = energy > 0.0 ? level / std::sqrt(energy / static_cast<double>(len)) : 0.0;
    const auto offset = static_cast<std::size_t>(t * kRate);
    for (std::size_t i = 0; i < src.size() && offset + i < n; ++i) speech[offset + i] += gain * src[i];

    t += syllable + (u(rng) < pause_prob ? uniform(0.10, 0.20) : uniform(0.015, 0.04));
    f_start = f_end;
  }

  const double noise = std::pow(10.0, uniform(-58.0, -46.0) / 20.0);
  dsp::AudioBuffer audio;
  audio.sample_rate = kRate;
  audio.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = std::clamp(speech[i] + noise * g(rng), -1.0, 32767.0 / 32768.0);
    audio.samples[i] = std::round(v * 32768.0) / 32768.0;
  }
  return audio;
}

std::string synth_text(double zt, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> length(4, 8);
  std::uniform_int_distribution<std::size_t> pick(0, 29);
  const double w_dir = std::exp(kTextBeta * zt), w_chat = std::exp(-kTextBeta * zt);
  std::discrete_distribution<int> group({w_dir, w_chat, 1.0});
  std::string out;
  for (int k = length(rng); k > 0; --k) {
    const int gidx = group(rng);
    const char* word = gidx == 0 ? kDirectedWords[pick(rng)] : gidx == 1 ? kChatWords[pick(rng)] : kNeutralWords[pick(rng)];
    if (!out.empty()) out += ' ';
    out += word;
  }
  return out;
}

std::vector<double> synth_asr(double z_asr, double nuisance_proxy, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> f(kAsrFeatureDim);
  for (std::size_t i = 0; i < 5; ++i) f[i] = z_asr + 0.8 * g(rng);  // confidence-like scores
  f[5] = nuisance_proxy;                                               // signal-to-noise estimate
  f[6] = g(rng);
  f[7] = g(rng);
  for (double& v : f) v = static_cast<double>(static_cast<float>(v));
  return f;
}

}  // namespace

void SynthConfig::validate() const {
  if (!(scale > 0.0)) throw UsageError("synth scale must be positive");
  for (double d : separability) {
    if (!(d >= 0.0)) throw UsageError("separability must be nonnegative");
  }
  if (!(correlation >= 0.0 && correlation <= 1.0)) throw UsageError("correlation must lie in [0,1]");
  if (!(nuisance_visibility >= 0.0 && nuisance_visibility <= 1.0)) {
    throw UsageError("nuisance visibility must lie in [0,1]");
  }
  if (imbalance && !(*imbalance > 0.0)) throw UsageError("imbalance must be positive");
  if (!(min_duration >= 0.1 && max_duration >= min_duration)) throw UsageError("invalid duration range");
  if (utterances_per_speaker == 0) throw UsageError("utterances_per_speaker must be positive");
}

std::array<std::size_t, 2> SynthConfig::split_counts(Split split) const {
  const auto& ref = kTable1Counts[static_cast<std::size_t>(split)];
  if (!imbalance) {
    return {static_cast<std::size_t>(std::max(1.0, std::round(ref[0] * scale))),
            static_cast<std::size_t>(std::max(1.0, std::round(ref[1] * scale)))};
  }
  const double total = (ref[0] + ref[1]) * scale;
  const double directed = std::max(1.0, std::round(total / (1.0 + *imbalance)));
  return {static_cast<std::size_t>(directed), static_cast<std::size_t>(std::max(1.0, std::round(total - directed)))};
}

SynthCorpus generate_synthetic_corpus(const SynthConfig& config) {
  config.validate();
  struct Slot {
    std::size_t split, index;
    int label;
  };
  std::vector<Slot> slots;
  for (std::size_t s = 0; s < kNumSplits; ++s) {
    const auto counts = config.split_counts(kAllSplits[s]);
    std::vector<int> labels(counts[0], 1);
    labels.resize(counts[0] + counts[1], 0);
    auto rng = stream(config.seed, 0x1A, s, 0);
    std::shuffle(labels.begin(), labels.end(), rng);
    for (std::size_t i = 0; i < labels.size(); ++i) slots.push_back({s, i, labels[i]});
  }

  SynthCorpus corpus;
  corpus.utterances.resize(slots.size());
  const double rho = config.correlation;
  const double vis = config.nuisance_visibility;
  parallel_for(slots.size(), [&](std::size_t k) {
    const Slot& slot = slots[k];
    auto rng = stream(config.seed, 0x07, slot.split, slot.index);
    std::normal_distribution<double> g(0.0, 1.0);
    SynthUtterance& utt = corpus.utterances[k];
    SynthLatents& lat = utt.latents;
    lat.label = slot.label;
    lat.nuisance = g(rng);
    for (Modality m : kAllModalities) {
      lat.z[index_of(m)] = config.separability[index_of(m)] * (slot.label - 0.5) + std::sqrt(rho) * lat.nuisance +
                           std::sqrt(1.0 - rho) * g(rng);
    }
    const double asr_proxy = vis * lat.nuisance + std::sqrt(1.0 - vis * vis) * g(rng);

    const std::size_t speaker_index = slot.index / config.utterances_per_speaker;
    const std::string split = std::string(split_name(kAllSplits[slot.split]));
    char uid[64], speaker[64];
    std::snprintf(uid, sizeof uid, "%s-%05zu", split.c_str(), slot.index);
    std::snprintf(speaker, sizeof speaker, "%s-spk%04zu", split.c_str(), speaker_index);

    utt.record.uid = uid;
    utt.record.speaker = speaker;
    utt.record.label = slot.label;
    utt.record.split = kAllSplits[slot.split];
    utt.record.audio = std::string("audio/") + uid + ".wav";
    utt.record.text = synth_text(lat.z[index_of(Modality::kText)], rng);
    utt.record.features[Modality::kAsr] = "features/asr.rec";
    utt.asr_features = synth_asr(lat.z[index_of(Modality::kAsr)], asr_proxy, rng);
    utt.audio = synth_audio(config, lat, make_speaker(config.seed, slot.split, speaker_index), rng);
  });
  return corpus;
}

Manifest corpus_manifest(const SynthCorpus& corpus) {
  Manifest m;
  for (const auto& u : corpus.utterances) m.records.push_back(u.record);
  return m;
}

Manifest write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "audio");
  std::vector<Record> asr;
  for (const auto& u : corpus.utterances) {
    dsp::write_wav(dir / u.record.audio, u.audio);
    asr.push_back(make_record(u.record.uid, Modality::kAsr, RecordKind::kFeatures,
                              nn::Tensor({kAsrFeatureDim}, u.asr_features)));
  }
  write_records(dir / "features" / "asr.rec", asr);
  Manifest m = corpus_manifest(corpus);
  m.base_dir = dir;
  write_manifest(dir / "manifest.jsonl", m);
  return m;
}

}  // namespace ddsd::data
