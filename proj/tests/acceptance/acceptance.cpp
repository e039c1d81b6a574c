// Acceptance suite: one PASS/FAIL line per criterion on stdout, the detailed
// table-style reports in a text file, progress on stderr.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "cli.hpp"
#include "ddsd/data/records.hpp"
#include "ddsd/data/synth.hpp"
#include "ddsd/dsp/pitch.hpp"
#include "ddsd/dsp/vad.hpp"
#include "ddsd/dsp/voice_quality.hpp"
#include "ddsd/eval/metrics.hpp"
#include "ddsd/fusion/fusion.hpp"
#include "ddsd/models/component.hpp"
#include "ddsd/nn/layers.hpp"
#include "ddsd/pipeline/experiment.hpp"
#include "ddsd/pipeline/features.hpp"
#include "ddsd/runtime.hpp"
#include "support/gradcheck.hpp"
#include "support/metric_oracle.hpp"
#include "support/signals.hpp"

using namespace ddsd;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// The relation that actually holds between two reported values.
const char* rel(double a, double b) { return a < b ? "<" : a == b ? "=" : ">"; }

struct Verdict {
  bool pass = false;
  std::string detail;
};

class Suite {
 public:
  explicit Suite(std::ostream& report) : report_(report) {}

  void record(int id, const std::string& title, const Verdict& v) {
    const std::string line = fmt("[%s] criterion %d, %s: ", v.pass ? "PASS" : "FAIL", id, title.c_str()) + v.detail;
    std::cout << line << std::endl;
    report_ << line << "\n";
    all_pass_ = all_pass_ && v.pass;
  }
  bool all_pass() const { return all_pass_; }
  std::ostream& report() { return report_; }

 private:
  std::ostream& report_;
  bool all_pass_ = true;
};

void progress(const std::string& message) { std::cerr << "  .. " << message << std::endl; }

// ---------------------------------------------------------------- criterion 1

nn::Tensor random_batch(std::vector<std::size_t> shape, std::mt19937_64& rng) {
  return testing::random_tensor(std::move(shape), rng);
}

std::vector<double> random_labels(std::size_t n, std::mt19937_64& rng) {
  std::vector<double> labels(n);
  for (auto& l : labels) l = static_cast<double>(rng() % 2);
  labels[0] = 1.0;
  return labels;
}

// Fusion input rows: logits drawn through the sigmoid for scores, small
// Gaussians for embeddings, one modality per row replaced by sentinels.
nn::Tensor fusion_rows(const fusion::FusionModel& model, std::size_t rows, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<FusionSample> samples(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    samples[i].uid = "g" + std::to_string(i);
    for (Modality m : kAllModalities) {
      auto& f = samples[i][m];
      f.present = true;
      f.score = 1.0 / (1.0 + std::exp(-g(rng)));
      f.embedding.resize(embedding_dim(m));
      for (auto& v : f.embedding) v = 0.5 * g(rng);
    }
    if (i % 3 == 2) mark_absent(samples[i][model.modalities[i % model.modalities.size()]],
                                model.modalities[i % model.modalities.size()]);
  }
  std::vector<std::size_t> idx(rows);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return fusion::encode_inputs(model, samples, idx);
}

Verdict criterion_gradients(std::ostream& report) {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  const nn::ClassWeights w{5.77, 1.0};
  std::vector<std::pair<std::string, testing::GradCheckResult>> results;

  {
    nn::ModelGraph g(1);
    g.add(nn::DenseLayer{6, 8, nn::Activation::kTanh});
    g.add(nn::DenseLayer{8, 8, nn::Activation::kRelu});
    g.add(nn::DenseLayer{8, 1, nn::Activation::kSigmoid});
    const auto x = random_batch({5, 6}, rng);
    results.emplace_back("dense", testing::check_gradients(g, x, {}, random_labels(5, rng), w, 200, 1));
  }
  {
    nn::ModelGraph g(2);
    g.add(nn::MaskLayer{});
    g.add(nn::GruLayer{3, 6});
    g.add(nn::DenseLayer{6, 1, nn::Activation::kSigmoid});
    const auto x = random_batch({4, 7, 3}, rng);
    const std::vector<std::size_t> lengths{7, 3, 5, 1};
    results.emplace_back("gru", testing::check_gradients(g, x, lengths, random_labels(4, rng), w, 200, 2));
  }
  {
    nn::ModelGraph g(3);
    g.add(nn::DenseLayer{5, 7, nn::Activation::kTanh});
    g.add(nn::LayerNormLayer{7});
    g.add(nn::DenseLayer{7, 1, nn::Activation::kSigmoid});
    const auto x = random_batch({6, 5}, rng);
    results.emplace_back("layer-norm", testing::check_gradients(g, x, {}, random_labels(6, rng), w, 200, 3));
  }
  {
    auto model = models::build_prosody_model(4);
    const auto x = random_batch({3, 12, 5}, rng);
    const std::vector<std::size_t> lengths{12, 9, 4};
    results.emplace_back("prosody", testing::check_gradients(model.graph, x, lengths, random_labels(3, rng), w, 300, 4));
  }
  const std::vector<Modality> all(kAllModalities.begin(), kAllModalities.end());
  {
    auto model = fusion::build_sl_model(all, 5);
    const auto x = fusion_rows(model, 6, rng);
    results.emplace_back("sl-fusion", testing::check_gradients(model.graph, x, {}, random_labels(6, rng), w, 300, 5));
  }
  {
    auto model = fusion::build_el_model(all, 6);
    const auto x = fusion_rows(model, 6, rng);
    results.emplace_back("el-fusion", testing::check_gradients(model.graph, x, {}, random_labels(6, rng), w, 300, 6));
  }

  double worst = 0.0;
  for (const auto& [name, r] : results) {
    report << fmt("  %-10s %4zu coordinates, max relative error %.2e\n", name.c_str(), r.coordinates, r.max_rel_error);
    worst = std::max(worst, r.max_rel_error);
  }
  const double secs = seconds_since(start);
  return {worst < 1e-4 && secs < 60.0,
          fmt("max relative error %.2e (< 1e-4) over dense, GRU, layer norm, prosody, SL, EL; %.1f s (< 60 s)",
              worst, secs)};
}

// ---------------------------------------------------------------- criterion 2

Verdict criterion_metrics(std::ostream& report) {
  std::mt19937_64 rng(2025);
  std::uniform_int_distribution<std::size_t> size(2, 50);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto set = testing::random_set(rng, size(rng), trial % 2 == 0);
    const auto fa = eval::compute_fa_at_fr(set, 0.10);
    const auto want = testing::brute_fa_at_fr(set, 0.10);
    if (eval::compute_eer(set) != testing::brute_eer(set) || fa.false_accept != want.false_accept ||
        fa.threshold != want.threshold) {
      ++mismatches;
    }
  }
  const auto chance = testing::random_classifier(5000, 77);
  const double eer = eval::compute_eer(chance);
  const double fa = eval::compute_fa_at_fr(chance).false_accept;
  report << fmt("  oracle mismatches %d / 1000; random classifier (n=10000) EER %.2f, FA@10%%FR %.2f\n", mismatches,
                eer, fa);
  return {mismatches == 0 && std::abs(eer - 50.0) <= 3.0 && std::abs(fa - 90.0) <= 3.0,
          fmt("%d/1000 oracle mismatches; random classifier EER %.2f (50 +- 3), FA@10%%FR %.2f (90 +- 3)",
              mismatches, eer, fa)};
}

// ---------------------------------------------------------------- criterion 3

std::vector<double> interior_voiced(const std::vector<double>& values, const dsp::PitchTrack& p) {
  std::vector<double> out;
  for (std::size_t t = 3; t + 3 < p.size(); ++t) {
    if (p.voiced(t)) out.push_back(values[t]);
  }
  return out;
}

Verdict criterion_dsp(std::ostream& report) {
  const auto start = Clock::now();
  using namespace ddsd::testing;

  // Pitch: median voiced estimate of sine, sawtooth and vowel tones.
  double worst_pitch = 0.0;
  bool pitch_ok = true;
  for (double f = 80; f <= 400; f += 10) {
    for (const auto& audio : {sine(f, 0.5), sawtooth(f, 0.5), vowel(f, 0.5)}) {
      const auto p = dsp::extract_pitch_voicing(audio);
      std::vector<double> voiced;
      for (std::size_t t = 0; t < p.size(); ++t) {
        if (p.voiced(t)) voiced.push_back(p.pitch_hz[t]);
      }
      if (voiced.size() <= p.size() / 2) {
        pitch_ok = false;
        continue;
      }
      worst_pitch = std::max(worst_pitch, std::abs(median(voiced) - f) / f);
    }
  }
  pitch_ok = pitch_ok && worst_pitch < 0.02;
  report << fmt("  pitch: worst relative error of the median estimate %.4f over 80-400 Hz\n", worst_pitch);

  // Jitter / shimmer on unperturbed pulse trains.
  double clean_max = 0.0;
  for (double f0 : {100.0, 150.0, 250.0}) {
    const auto times = pulse_times({1.0 / f0}, 1.0);
    const dsp::AudioBuffer a = pulse_train(times, std::vector<double>(times.size(), 0.8), 1.0);
    const auto p = dsp::extract_pitch_voicing(a);
    const auto q = dsp::extract_jitter_shimmer(a, p);
    for (double v : interior_voiced(q.jitter, p)) clean_max = std::max(clean_max, v);
    for (double v : interior_voiced(q.shimmer, p)) clean_max = std::max(clean_max, v);
  }

  // Perturbed: alternating periods (closed-form jitter) and alternating peaks
  // (closed-form shimmer). Every interior voiced frame must be within 20%.
  double worst_perturbed = 0.0;
  {
    const auto times = pulse_times({0.0066, 0.0067}, 1.0);
    const dsp::AudioBuffer a = pulse_train(times, std::vector<double>(times.size(), 0.8), 1.0);
    const auto p = dsp::extract_pitch_voicing(a);
    const double closed_form = 0.0001 / 0.00665;
    for (double v : interior_voiced(dsp::extract_jitter_shimmer(a, p).jitter, p)) {
      worst_perturbed = std::max(worst_perturbed, std::abs(v - closed_form) / closed_form);
    }
  }
  {
    const auto times = pulse_times({1.0 / 150}, 1.0);
    std::vector<double> amps(times.size());
    for (std::size_t k = 0; k < amps.size(); ++k) amps[k] = k % 2 ? 0.72 : 0.88;
    const double closed_form = 0.16 / 0.8;
    const dsp::AudioBuffer a = pulse_train(times, amps, 1.0);
    const auto p = dsp::extract_pitch_voicing(a);
    for (double v : interior_voiced(dsp::extract_jitter_shimmer(a, p).shimmer, p)) {
      worst_perturbed = std::max(worst_perturbed, std::abs(v - closed_form) / closed_form);
    }
  }
  report << fmt("  jitter/shimmer: unperturbed max %.5f, perturbed worst relative deviation %.3f\n", clean_max,
                worst_perturbed);

  // VAD on 0.5 s tone / silence alternation, every frame scored.
  dsp::AudioBuffer a = silence(6.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((i / 8000) % 2 == 0) a.samples[i] = 0.3 * std::sin(2 * std::numbers::pi * 300 * i / 16000.0);
  }
  const auto vad = dsp::extract_vad(a);
  std::size_t correct = 0;
  for (std::size_t t = 0; t < vad.size(); ++t) {
    const double centre = (static_cast<double>(t) * 160 + 320) / 16000.0;
    const bool speech = static_cast<int>(centre / 0.5) % 2 == 0;
    correct += (vad[t] >= 0.5) == speech;
  }
  const double accuracy = static_cast<double>(correct) / static_cast<double>(vad.size());
  report << fmt("  vad: frame accuracy %.4f over %zu frames\n", accuracy, vad.size());

  const double secs = seconds_since(start);
  return {pitch_ok && clean_max < 0.005 && worst_perturbed < 0.2 && accuracy > 0.95 && secs < 120.0,
          fmt("pitch err %.2f%% (< 2%%); jitter/shimmer clean max %.4f (< 0.005), perturbed dev %.1f%% (< 20%%); "
              "VAD acc %.1f%% (> 95%%); %.1f s (< 120 s)",
              100 * worst_pitch, clean_max, 100 * worst_perturbed, 100 * accuracy, secs)};
}

// ---------------------------------------------------------------- criterion 4

struct ProsodyRun {
  nn::TrainHistory history;
  eval::EvalReport test;
  eval::EvalReport test_true_labels;
};

ProsodyRun train_prosody(const data::SynthCorpus& corpus, const pipeline::FeatureStore& store, bool shuffle_labels,
                         std::uint64_t seed) {
  const data::Manifest manifest = data::corpus_manifest(corpus);
  auto train = pipeline::component_data(store, manifest.filter(data::Split::kTrainComp), Modality::kProsody);
  auto val = pipeline::component_data(store, manifest.filter(data::Split::kValComp), Modality::kProsody);
  // Scored on every split the model never saw, so chance-level results are
  // measured on about a thousand utterances rather than the test split alone.
  data::Manifest held_out;
  for (const auto& r : manifest.records) {
    if (r.split != data::Split::kTrainComp && r.split != data::Split::kValComp) held_out.records.push_back(r);
  }
  auto test = pipeline::component_data(store, held_out, Modality::kProsody);
  const std::vector<int> true_test_labels = test.labels;
  if (shuffle_labels) {
    // The whole corpus is label-shuffled, held-out split included.
    std::mt19937_64 rng(seed + 17);
    std::shuffle(train.labels.begin(), train.labels.end(), rng);
    std::shuffle(val.labels.begin(), val.labels.end(), rng);
    std::shuffle(test.labels.begin(), test.labels.end(), rng);
  }
  auto model = models::build_prosody_model(seed);
  nn::TrainConfig config;
  config.epochs = 50;
  config.seed = seed;
  ProsodyRun run;
  run.history = models::train_component(model, train, val, config);
  const auto outputs = models::infer_components(model, test.features);
  std::vector<eval::ScoredEntry> entries(outputs.size());
  for (std::size_t i = 0; i < outputs.size(); ++i) entries[i] = {outputs[i].score, test.labels[i]};
  run.test = eval::evaluate(entries);
  for (std::size_t i = 0; i < outputs.size(); ++i) entries[i].label = true_test_labels[i];
  run.test_true_labels = eval::evaluate(entries);
  return run;
}

Verdict criterion_prosody(std::ostream& report, double scale, double separation) {
  const auto start = Clock::now();
  const std::size_t params = models::build_prosody_model(0).graph.parameter_count();

  data::SynthConfig config;
  config.scale = scale;
  config.separability[index_of(Modality::kProsody)] = separation;
  config.seed = 41;
  const auto corpus = data::generate_synthetic_corpus(config);
  const std::vector<Modality> mods{Modality::kProsody};
  const auto store = pipeline::corpus_features(corpus, mods);
  progress("prosody on the separable corpus");
  const ProsodyRun separable = train_prosody(corpus, store, false, 41);
  progress("prosody with shuffled labels");
  const ProsodyRun shuffled = train_prosody(corpus, store, true, 42);

  const double val_eer = separable.history.best_val_metric;
  const double shuffled_eer = shuffled.test.eer;
  report << fmt("  parameters %zu; separable corpus (scale %.3f, prosody separation %.1f): best val EER %.2f at "
                "epoch %d, held-out %s\n",
                params, scale, separation, val_eer, separable.history.best_epoch,
                eval::summary_line(separable.test).c_str());
  report << fmt("  shuffled labels: held-out %s; against the true held-out labels %s\n",
                eval::summary_line(shuffled.test).c_str(), eval::summary_line(shuffled.test_true_labels).c_str());
  const double secs = seconds_since(start);
  return {params >= 45000 && params <= 56000 && val_eer < 5.0 && std::abs(shuffled_eer - 50.0) <= 5.0 &&
              secs < 600.0,
          fmt("%zu params (45K-56K); separable val EER %.2f (< 5) by epoch %d; shuffled-label EER %.2f (50 +- 5); "
              "%.0f s (< 600 s)",
              params, val_eer, separable.history.best_epoch, shuffled_eer, secs)};
}

// ------------------------------------------------------------ criteria 5 - 7

struct SeedResult {
  std::uint64_t seed = 0;
  std::array<eval::EvalReport, kNumModalities> single;
  pipeline::FusionStageResult fusion;
  pipeline::ComponentStageResult components;
  double seconds = 0.0;
};

struct ExperimentConfig {
  double scale = 0.1;
  int seeds = 5;
  int acoustic_epochs = 10;
  int epochs = 50;
};

pipeline::FusionStageConfig fusion_config(const ExperimentConfig& cfg) {
  pipeline::FusionStageConfig fc;
  fc.train.epochs = cfg.epochs;
  return fc;
}

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto start = Clock::now();
  data::SynthConfig sc;
  sc.scale = cfg.scale;
  sc.seed = seed;
  const auto corpus = data::generate_synthetic_corpus(sc);
  pipeline::ComponentStageConfig cc;
  cc.epochs = {cfg.acoustic_epochs, cfg.epochs, cfg.epochs, cfg.epochs};
  SeedResult r;
  r.seed = seed;
  r.components = pipeline::run_component_stage(corpus, cc, seed * 10);
  r.single = r.components.test_reports;
  r.fusion = pipeline::run_fusion_stage(r.components.splits, pipeline::standard_fusion_runs(), fusion_config(cfg),
                                        seed * 10);
  r.seconds = seconds_since(start);
  return r;
}

using Series = std::map<std::string, std::vector<double>>;

void print_table(std::ostream& out, const std::string& title, const std::vector<std::string>& rows,
                 const std::vector<SeedResult>& seeds, const std::function<const eval::EvalReport*(
                                                                            const SeedResult&, const std::string&)>& get,
                 Series& fa_medians) {
  out << "\n" << title << "\n";
  out << fmt("  %-20s", "system");
  for (const auto& s : seeds) out << fmt("  seed %-2llu EER / FA ", static_cast<unsigned long long>(s.seed));
  out << "   median EER / FA\n";
  for (const auto& row : rows) {
    std::vector<double> eers, fas;
    out << fmt("  %-20s", row.c_str());
    for (const auto& s : seeds) {
      const eval::EvalReport* r = get(s, row);
      if (r == nullptr) {
        out << fmt("  %16s", "n/a");
        continue;
      }
      eers.push_back(r->eer);
      fas.push_back(r->fa_at_fr10);
      out << fmt("  %6.2f / %6.2f  ", r->eer, r->fa_at_fr10);
    }
    if (!fas.empty()) {
      out << fmt("   %6.2f / %6.2f", median(eers), median(fas));
      fa_medians[row] = fas;
    }
    out << "\n";
  }
}

// ---------------------------------------------------------------- criterion 8

std::string strip_timing(const std::string& text) {
  std::istringstream in(text);
  std::string out, line;
  while (std::getline(in, line)) {
    if (line.rfind("# elapsed_seconds", 0) == 0) continue;
    out += line + "\n";
  }
  return out;
}

// Runs every CLI command on a tiny corpus inside `dir`; returns the printed
// outputs and every artifact (logs without timings).
std::map<std::string, std::string> cli_pipeline(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path cwd = fs::current_path();
  fs::current_path(dir);
  std::map<std::string, std::string> outputs;
  int step = 0;
  auto run = [&](std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (code != 0) throw std::runtime_error("cli step failed: " + err.str());
    outputs[fmt("stdout %02d %s", step++, args[0].c_str())] = out.str();
  };
  const std::string m = "corpus/manifest.jsonl";
  try {
    run({"synth", "--out", "corpus", "--scale", "0.004", "--seed", "3"});
    run({"extract", "--manifest", m});
    for (std::string mod : {"acoustic", "text", "asr", "prosody"}) {
      run({"train-component", "--manifest", m, "--modality", mod, "--out", "models/" + mod + ".model", "--epochs",
           "2", "--seed", "3"});
      run({"export", "--model", "models/" + mod + ".model", "--manifest", m, "--out", "scores"});
    }
    for (std::string kind : {"avg", "sl", "el"}) {
      run({"train-fusion", "--kind", kind, "--manifest", m, "--directedness", "scores", "--out",
           "models/" + kind + ".model", "--epochs", "3", "--modality-dropout", "--seed", "3"});
    }
    run({"corrupt", "--manifest", m, "--directedness", "scores", "--out", "corrupted", "--rate", "0.3", "--seed",
         "3"});
    for (std::string kind : {"avg", "sl", "el"}) {
      run({"eval", "--model", "models/" + kind + ".model", "--manifest", m, "--directedness", "corrupted", "--det",
           "eval/" + kind + ".csv", "--report", "eval/" + kind + ".json"});
    }
    run({"eval", "--model", "models/prosody.model", "--manifest", m});
  } catch (...) {
    fs::current_path(cwd);
    throw;
  }
  fs::current_path(cwd);
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), dir).string();
    const std::string bytes = data::read_file(entry.path());
    outputs[rel] = entry.path().extension() == ".log" ? strip_timing(bytes) : bytes;
  }
  return outputs;
}

bool same_reports(const eval::EvalReport& a, const eval::EvalReport& b) {
  if (a.eer != b.eer || a.fa_at_fr10 != b.fa_at_fr10 || a.threshold_at_fr10 != b.threshold_at_fr10) return false;
  if (a.det_points.size() != b.det_points.size()) return false;
  for (std::size_t i = 0; i < a.det_points.size(); ++i) {
    const auto &p = a.det_points[i], &q = b.det_points[i];
    if (p.threshold != q.threshold || p.false_accept != q.false_accept || p.false_reject != q.false_reject) {
      return false;
    }
  }
  return true;
}

Verdict criterion_determinism(std::ostream& report, const ExperimentConfig& cfg, const SeedResult& first,
                              const fs::path& scratch) {
  const auto start = Clock::now();
  std::vector<std::string> problems;

  // Every CLI command, twice.
  progress("CLI pipeline, run 1");
  const auto a = cli_pipeline(scratch / "run1");
  progress("CLI pipeline, run 2");
  const auto b = cli_pipeline(scratch / "run2");
  std::size_t differing = 0;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second != bytes) {
      ++differing;
      problems.push_back("cli artifact " + name);
    }
  }
  if (a.size() != b.size()) problems.push_back("cli artifact sets differ");
  report << fmt("  CLI pipeline: %zu artifacts and outputs compared, %zu differ\n", a.size(), differing);

  // The fusion stage of the first experiment seed, re-run in process.
  progress("fusion stage re-run");
  const auto again = pipeline::run_fusion_stage(first.components.splits, pipeline::standard_fusion_runs(),
                                                fusion_config(cfg), first.seed * 10);
  for (const auto& [name, r] : first.fusion.clean) {
    if (!same_reports(r, again.clean.at(name))) problems.push_back("clean " + name);
  }
  for (const auto& [name, r] : first.fusion.corrupted) {
    if (!same_reports(r, again.corrupted.at(name))) problems.push_back("corrupted " + name);
  }

  // Serialization round trips of the trained models.
  std::size_t roundtrips = 0;
  const auto& test = first.components.splits.test;
  for (Modality m : kAllModalities) {
    const auto& model = first.components.models[index_of(m)];
    const std::string bytes = nn::encode_model(models::to_model_file(model));
    const auto loaded = models::from_model_file(nn::decode_model(bytes));
    if (nn::encode_model(models::to_model_file(loaded)) != bytes) problems.push_back("component bytes " +
                                                                                     std::string(modality_name(m)));
    for (std::size_t i = 0; i < std::min<std::size_t>(test.size(), 64); ++i) {
      const auto& e = test[i][m].embedding;
      if (models::apply_head(model, e) != models::apply_head(loaded, e)) {
        problems.push_back("component head " + std::string(modality_name(m)));
        break;
      }
    }
    ++roundtrips;
  }
  for (const auto& [name, model] : first.fusion.models) {
    const std::string bytes = nn::encode_model(fusion::to_model_file(model));
    const auto loaded = fusion::from_model_file(nn::decode_model(bytes));
    if (nn::encode_model(fusion::to_model_file(loaded)) != bytes ||
        fusion::infer_fusion(model, test) != fusion::infer_fusion(loaded, test)) {
      problems.push_back("fusion round trip " + name);
    }
    ++roundtrips;
  }
  report << fmt("  fusion stage re-run and %zu model round trips checked\n", roundtrips);
  for (const auto& p : problems) report << "  mismatch: " << p << "\n";

  const double secs = seconds_since(start);
  return {problems.empty(),
          fmt("%zu CLI artifacts identical across runs, fusion re-run bit-exact, %zu model round trips bit-exact; "
              "%zu mismatches; %.0f s",
              a.size() - differing, roundtrips, problems.size(), secs)};
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Acceptance suite"};
  ExperimentConfig cfg;
  double c4_scale = 0.02;
  double c4_separation = 6.0;
  std::string report_path = "acceptance_report.txt";
  std::string scratch = "acceptance_scratch";
  app.add_option("--scale", cfg.scale, "Synthetic corpus scale for the fusion experiments")->capture_default_str();
  app.add_option("--seeds", cfg.seeds, "Experiment seeds")->capture_default_str();
  app.add_option("--acoustic-epochs", cfg.acoustic_epochs, "Epochs of the acoustic stand-in")->capture_default_str();
  app.add_option("--epochs", cfg.epochs, "Epochs of every other model")->capture_default_str();
  app.add_option("--prosody-scale", c4_scale, "Corpus scale of the prosody learnability check")->capture_default_str();
  app.add_option("--prosody-separation", c4_separation, "Prosody class separation of that corpus")
      ->capture_default_str();
  app.add_option("--report", report_path, "Detailed report file")->capture_default_str();
  app.add_option("--scratch", scratch, "Scratch directory")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const auto start = Clock::now();
  std::ofstream report_file(report_path);
  Suite suite(report_file);
  std::ostream& report = suite.report();
  report << fmt("acceptance suite: scale %.3f, %d seeds, acoustic epochs %d, other epochs %d\n\n", cfg.scale,
                cfg.seeds, cfg.acoustic_epochs, cfg.epochs);

  auto guarded = [&](int id, const std::string& title, const std::function<Verdict()>& body) {
    std::cerr << "criterion " << id << ": " << title << std::endl;
    report << "criterion " << id << ": " << title << "\n";
    try {
      suite.record(id, title, body());
    } catch (const std::exception& e) {
      suite.record(id, title, {false, std::string("exception: ") + e.what()});
    }
    report.flush();
  };

  guarded(1, "gradient correctness", [&] { return criterion_gradients(report); });
  guarded(2, "metric oracle", [&] { return criterion_metrics(report); });
  guarded(3, "DSP oracles", [&] { return criterion_dsp(report); });
  guarded(4, "prosody model budget and learnability",
          [&] { return criterion_prosody(report, c4_scale, c4_separation); });

  std::vector<SeedResult> seeds;
  std::string experiment_error = cfg.seeds < 1 ? "no experiment seeds requested" : "";
  if (cfg.seeds >= 1) try {
    for (int s = 1; s <= cfg.seeds; ++s) {
      std::cerr << "experiment seed " << s << std::endl;
      seeds.push_back(run_seed(cfg, static_cast<std::uint64_t>(s)));
      report << fmt("seed %d finished in %.0f s\n", s, seeds.back().seconds);
    }
  } catch (const std::exception& e) {
    experiment_error = e.what();
  }

  Series fa;
  if (experiment_error.empty()) {
    {
      const auto& c = seeds.front();
      report << "\nTable 1 analog: split sizes (directed / not-directed), seed 1\n";
      const std::array<const std::vector<FusionSample>*, 3> sets{&c.components.splits.train, &c.components.splits.val,
                                                                 &c.components.splits.test};
      const char* names[3] = {"train-fus", "val-fus", "test"};
      for (std::size_t k = 0; k < 3; ++k) {
        std::size_t pos = 0;
        for (const auto& s : *sets[k]) pos += s.label == 1;
        report << fmt("  %-10s %5zu / %5zu\n", names[k], pos, sets[k]->size() - pos);
      }
    }
    std::vector<std::string> singles;
    for (Modality m : kAllModalities) singles.push_back(std::string(modality_name(m)));
    print_table(report, "Table 2 analog: single modalities (test)", singles, seeds,
                [](const SeedResult& s, const std::string& row) {
                  return &s.single[index_of(parse_modality(row))];
                },
                fa);
    const auto clean = [](const SeedResult& s, const std::string& row) -> const eval::EvalReport* {
      const auto it = s.fusion.clean.find(row);
      return it == s.fusion.clean.end() ? nullptr : &it->second;
    };
    const auto corrupted = [](const SeedResult& s, const std::string& row) -> const eval::EvalReport* {
      const auto it = s.fusion.corrupted.find(row);
      return it == s.fusion.corrupted.end() ? nullptr : &it->second;
    };
    print_table(report, "Table 3 analog: fusion schemes (test)", {"AVG", "SL", "EL"}, seeds, clean, fa);
    print_table(report, "Table 4 analog: prosody and modality dropout (test)", {"EL-verbal", "EL", "EL+MD"}, seeds,
                clean, fa);
    Series corrupted_fa;
    print_table(report, "Table 5 analog: 30% of modalities missing (test)", {"SL", "EL-verbal", "EL", "EL+MD"}, seeds,
                corrupted, corrupted_fa);
    report << "\n";

    const auto med = [&](const Series& s, const std::string& k) { return median(s.at(k)); };
    {
      double best_single = 1e9;
      std::string best_name;
      for (const auto& name : singles) {
        if (med(fa, name) < best_single) {
          best_single = med(fa, name);
          best_name = name;
        }
      }
      const double el = med(fa, "EL"), sl = med(fa, "SL"), avg = med(fa, "AVG");
      guarded(5, "fusion ordering", [&]() -> Verdict {
        return {el < sl && sl <= avg && el < best_single,
                fmt("median FA@10%%FR EL %.2f %s SL %.2f %s AVG %.2f; EL %s best single (%s %.2f)", el, rel(el, sl),
                    sl, rel(sl, avg), avg, rel(el, best_single), best_name.c_str(), best_single)};
      });
    }
    guarded(6, "prosody benefit", [&]() -> Verdict {
      const double el = med(fa, "EL"), verbal = med(fa, "EL-verbal");
      return {el < verbal, fmt("median FA@10%%FR EL(all 4) %.2f %s EL(verbal 3) %.2f", el, rel(el, verbal), verbal)};
    });
    guarded(7, "modality dropout robustness", [&]() -> Verdict {
      const double md = med(corrupted_fa, "EL+MD"), el = med(corrupted_fa, "EL"),
                   verbal = med(corrupted_fa, "EL-verbal");
      const double md_clean = med(fa, "EL+MD"), el_clean = med(fa, "EL");
      return {md < el && el < verbal && md_clean <= el_clean + 1.0,
              fmt("30%% missing: EL+MD %.2f %s EL %.2f %s EL(verbal) %.2f; clean EL+MD %.2f %s EL %.2f + 1", md,
                  rel(md, el), el, rel(el, verbal), verbal, md_clean, rel(md_clean, el_clean + 1.0), el_clean)};
    });
    guarded(8, "determinism", [&] { return criterion_determinism(report, cfg, seeds.front(), scratch); });
  } else {
    for (int id : {5, 6, 7, 8}) {
      guarded(id, "fusion experiment", [&]() -> Verdict { return {false, "experiment failed: " + experiment_error}; });
    }
  }

  const double minutes = seconds_since(start) / 60.0;
  const std::string runtime =
      fmt("[%s] total runtime %.1f min (target < 45 min)", minutes < 45.0 ? "PASS" : "FAIL", minutes);
  std::cout << runtime << std::endl;
  report << runtime << "\n";
  return suite.all_pass() && minutes < 45.0 ? 0 : 1;
}
