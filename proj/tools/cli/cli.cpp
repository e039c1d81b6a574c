#include "cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "config.hpp"
#include "ddsd/data/manifest.hpp"
#include "ddsd/data/records.hpp"
#include "ddsd/data/synth.hpp"
#include "ddsd/error.hpp"
#include "ddsd/eval/metrics.hpp"
#include "ddsd/fusion/fusion.hpp"
#include "ddsd/models/component.hpp"
#include "ddsd/nn/serialize.hpp"
#include "ddsd/pipeline/experiment.hpp"
#include "ddsd/pipeline/features.hpp"

namespace ddsd::cli {
namespace {

namespace fs = std::filesystem;

std::string text(const std::string& v) { return v; }
std::string text(bool v) { return v ? "true" : "false"; }
std::string text(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}
template <typename T>
  requires std::is_integral_v<T>
std::string text(T v) {
  return std::to_string(v);
}

// Options of one command, remembered so the run log can echo the effective
// values in config-file form.
class Options {
 public:
  explicit Options(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* add(const std::string& name, T& var, const std::string& help) {
    echo_.emplace_back(name, [&var] { return text(var); });
    return app_->add_option("--" + name, var, help)->capture_default_str();
  }
  CLI::Option* flag(const std::string& name, bool& var, const std::string& help) {
    echo_.emplace_back(name, [&var] { return text(var); });
    return app_->add_flag("--" + name, var, help);
  }

  std::vector<std::pair<std::string, std::string>> values() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [name, get] : echo_) out.emplace_back(name, get());
    return out;
  }

 private:
  CLI::App* app_;
  std::vector<std::pair<std::string, std::function<std::string()>>> echo_;
};

// Results a command reports; they end up both on stdout and in the log.
class RunLog {
 public:
  void result(const std::string& key, const std::string& value) { results_.emplace_back(key, value); }

  void write(const fs::path& path, const std::string& command, const Options& options, const std::string& status,
             double seconds) const {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write run log " + path.string());
    out << "# ddsd " << command << "\n";
    for (const auto& [key, value] : options.values()) out << key << "=" << value << "\n";
    for (const auto& [key, value] : results_) out << "# result " << key << " " << value << "\n";
    out << "# status " << status << "\n";
    out << "# elapsed_seconds " << std::fixed << std::setprecision(2) << seconds << "\n";
  }

 private:
  std::vector<std::pair<std::string, std::string>> results_;
};

struct Command {
  std::string name;
  CLI::App* app = nullptr;
  std::unique_ptr<Options> options;
  std::string log;
  std::function<fs::path()> default_log;
  std::function<void(RunLog&, std::ostream&)> body;
};

std::string fixed2(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << v;
  return s.str();
}

data::Manifest load_manifest(const std::string& path) {
  data::Manifest manifest = data::read_manifest(path);
  data::validate_manifest(manifest);
  if (manifest.records.empty()) throw DataError("manifest " + path + " has no records");
  return manifest;
}

// "all", "auto" (test split if the manifest has splits, else everything) or
// a comma-separated list of split names.
data::Manifest select_splits(const data::Manifest& manifest, const std::string& spec) {
  if (spec == "all") return manifest;
  std::set<data::Split> wanted;
  if (spec == "auto") {
    const bool has_splits = std::any_of(manifest.records.begin(), manifest.records.end(),
                                        [](const auto& r) { return r.split.has_value(); });
    if (!has_splits) return manifest;
    wanted.insert(data::Split::kTest);
  } else {
    std::stringstream in(spec);
    for (std::string item; std::getline(in, item, ',');) wanted.insert(data::parse_split(item));
  }
  data::Manifest out;
  out.base_dir = manifest.base_dir;
  for (const auto& r : manifest.records) {
    if (r.split && wanted.count(*r.split)) out.records.push_back(r);
  }
  if (out.records.empty()) throw DataError("no manifest records in split(s) " + spec);
  return out;
}

data::Manifest require_split(const data::Manifest& manifest, data::Split split) {
  data::Manifest out = manifest.filter(split);
  if (out.records.empty()) {
    throw DataError("manifest has no " + std::string(data::split_name(split)) + " records");
  }
  return out;
}

std::vector<Modality> modality_list(const std::string& spec) {
  auto mods = parse_modality_list(spec);
  if (mods.empty()) throw UsageError("empty modality list");
  return mods;
}

nn::TrainConfig train_config(int epochs, double lr, std::size_t batch, double clip, std::uint64_t seed) {
  nn::TrainConfig config;
  config.epochs = epochs;
  config.learning_rate = lr;
  config.batch_size = batch;
  config.grad_clip_norm = clip;
  config.seed = seed;
  config.validate();
  return config;
}

std::vector<Modality> modalities_in_dir(const fs::path& dir) {
  std::vector<Modality> out;
  for (Modality m : kAllModalities) {
    if (fs::exists(models::directedness_path(dir, m))) out.push_back(m);
  }
  if (out.empty()) throw DataError("no directedness record files in " + dir.string());
  return out;
}

eval::EvalReport evaluate_component(const models::ComponentModel& model, const data::Manifest& manifest) {
  const std::vector<Modality> mods{model.modality};
  const auto store = pipeline::load_features(manifest, mods);
  const auto data = pipeline::component_data(store, manifest, model.modality);
  const auto outputs = models::infer_components(model, data.features);
  std::vector<eval::ScoredEntry> entries(outputs.size());
  for (std::size_t i = 0; i < outputs.size(); ++i) entries[i] = {outputs[i].score, data.labels[i]};
  return eval::evaluate(entries);
}

std::vector<double> fusion_scores(const fusion::FusionModel& model, std::span<const FusionSample> samples) {
  if (model.kind != fusion::FusionKind::kAvg) return fusion::infer_fusion(model, samples);
  std::vector<double> scores(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) scores[i] = fusion::fuse_avg(samples[i], model.modalities);
  return scores;
}

void write_text(const std::string& path, const std::string& content) {
  if (path.empty()) return;
  data::write_file(path, content);
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Device-directed speech detection with prosody and multimodal fusion", "ddsd"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");
  app.add_option("--config", "Flat key=value file of command options; command-line flags take precedence");

  std::vector<Command> commands;
  auto add_command = [&](const std::string& name, const std::string& help) -> Command& {
    Command& c = commands.emplace_back();
    c.name = name;
    c.app = app.add_subcommand(name, help);
    c.options = std::make_unique<Options>(c.app);
    c.app->add_option("--log", c.log, "Run log path");
    c.app->add_option("--config", "Flat key=value file of options");
    return c;
  };
  commands.reserve(7);

  // synth
  struct {
    std::string out;
    double scale = 0.1;
    double sep_acoustic = 1.1, sep_text = 1.4, sep_asr = 1.6, sep_prosody = 1.3;
    double correlation = 0.5;
    double visibility = 0.95;
    double imbalance = 0.0;
    double min_duration = 0.5, max_duration = 0.8;
    std::size_t per_speaker = 20;
    std::uint64_t seed = 1;
  } synth;
  {
    Command& c = add_command("synth", "Generate a synthetic corpus (audio, transcripts, ASR features, manifest)");
    auto& o = *c.options;
    o.add("out", synth.out, "Output directory")->required();
    o.add("scale", synth.scale, "Fraction of the reference split sizes");
    o.add("sep-acoustic", synth.sep_acoustic, "Class separation of the acoustic latent (noise sigmas)");
    o.add("sep-text", synth.sep_text, "Class separation of the text latent");
    o.add("sep-asr", synth.sep_asr, "Class separation of the ASR latent");
    o.add("sep-prosody", synth.sep_prosody, "Class separation of the prosody latent");
    o.add("correlation", synth.correlation, "Cross-modality correlation of the latent noise");
    o.add("nuisance-visibility", synth.visibility, "Correlation of ASR feature 5 with the shared nuisance");
    o.add("imbalance", synth.imbalance, "not-directed:directed ratio; 0 keeps the reference counts");
    o.add("min-duration", synth.min_duration, "Shortest utterance, seconds");
    o.add("max-duration", synth.max_duration, "Longest utterance, seconds");
    o.add("utterances-per-speaker", synth.per_speaker, "Utterances per synthetic speaker");
    o.add("seed", synth.seed, "Random seed");
    c.default_log = [&] { return fs::path(synth.out) / "synth.log"; };
    c.body = [&](RunLog& log, std::ostream& os) {
      data::SynthConfig config;
      config.scale = synth.scale;
      config.separability = {synth.sep_acoustic, synth.sep_text, synth.sep_asr, synth.sep_prosody};
      config.correlation = synth.correlation;
      config.nuisance_visibility = synth.visibility;
      if (synth.imbalance != 0.0) config.imbalance = synth.imbalance;
      config.min_duration = synth.min_duration;
      config.max_duration = synth.max_duration;
      config.utterances_per_speaker = synth.per_speaker;
      config.seed = synth.seed;
      config.validate();
      const data::Manifest manifest = data::write_corpus(data::generate_synthetic_corpus(config), synth.out);
      for (data::Split s : data::kAllSplits) {
        const data::Manifest part = manifest.filter(s);
        const std::string counts = std::to_string(part.count(1)) + " directed, " +
                                   std::to_string(part.count(0)) + " not-directed";
        os << data::split_name(s) << ": " << counts << "\n";
        log.result(std::string(data::split_name(s)), counts);
      }
      os << "wrote " << (fs::path(synth.out) / "manifest.jsonl").string() << "\n";
    };
  }

  // extract
  struct {
    std::string manifest;
    std::string modalities = "prosody,acoustic";
    std::string out_manifest;
  } extract;
  {
    Command& c = add_command("extract", "Compute prosody and/or filterbank features for a manifest");
    auto& o = *c.options;
    o.add("manifest", extract.manifest, "Input manifest")->required();
    o.add("modalities", extract.modalities, "Audio modalities to extract (prosody, acoustic)");
    o.add("out-manifest", extract.out_manifest, "Updated manifest path; defaults to rewriting the input");
    c.default_log = [&] { return fs::path(extract.manifest).parent_path() / "extract.log"; };
    c.body = [&](RunLog& log, std::ostream& os) {
      const auto mods = modality_list(extract.modalities);
      for (Modality m : mods) {
        if (!pipeline::audio_modality(m)) {
          throw UsageError(std::string(modality_name(m)) + " features are not extracted from audio");
        }
      }
      const data::Manifest manifest = load_manifest(extract.manifest);
      const data::Manifest updated = pipeline::extract_manifest_features(manifest, mods);
      const std::string target = extract.out_manifest.empty() ? extract.manifest : extract.out_manifest;
      data::write_manifest(target, updated);
      log.result("utterances", std::to_string(updated.records.size()));
      os << "extracted " << extract.modalities << " for " << updated.records.size() << " utterances\n";
    };
  }

  // train-component
  struct {
    std::string manifest, modality, out;
    int epochs = 50;
    double lr = 1e-3;
    std::size_t batch = 150;
    double clip = 1.0;
    std::uint64_t seed = 1;
  } tc;
  {
    Command& c = add_command("train-component", "Train one single-modality directedness model");
    auto& o = *c.options;
    o.add("manifest", tc.manifest, "Manifest with train-comp and val-comp splits")->required();
    o.add("modality", tc.modality, "acoustic, text, asr or prosody")->required();
    o.add("out", tc.out, "Model file to write")->required();
    o.add("epochs", tc.epochs, "Training epochs");
    o.add("learning-rate", tc.lr, "Adam learning rate");
    o.add("batch-size", tc.batch, "Mini-batch size");
    o.add("grad-clip", tc.clip, "Gradient norm clip");
    o.add("seed", tc.seed, "Random seed (initialization, shuffling, dropout)");
    c.default_log = [&] { return fs::path(tc.out + ".log"); };
    c.body = [&](RunLog& log, std::ostream& os) {
      const Modality m = parse_modality(tc.modality);
      const auto config = train_config(tc.epochs, tc.lr, tc.batch, tc.clip, tc.seed);
      const data::Manifest manifest = load_manifest(tc.manifest);
      const data::Manifest train = require_split(manifest, data::Split::kTrainComp);
      const data::Manifest val = require_split(manifest, data::Split::kValComp);
      const std::vector<Modality> mods{m};
      const auto store = pipeline::load_features(manifest, mods);
      models::ComponentModel model = models::build_component(m, tc.seed);
      const auto history = models::train_component(model, pipeline::component_data(store, train, m),
                                                   pipeline::component_data(store, val, m), config);
      models::save_component(model, tc.out);
      log.result("best_epoch", std::to_string(history.best_epoch));
      log.result("val_eer", fixed2(history.best_val_metric));
      os << modality_name(m) << ": best epoch " << history.best_epoch << ", val EER "
         << fixed2(history.best_val_metric) << "\n";
    };
  }

  // export
  struct {
    std::string model, manifest, out;
    std::string splits = "all";
  } ex;
  {
    Command& c = add_command("export", "Write directedness scores and embeddings of a component model");
    auto& o = *c.options;
    o.add("model", ex.model, "Component model file")->required();
    o.add("manifest", ex.manifest, "Manifest with extracted features")->required();
    o.add("out", ex.out, "Directory for <modality>.rec")->required();
    o.add("splits", ex.splits, "all, auto or a comma-separated split list");
    c.default_log = [&] { return fs::path(ex.out) / ("export-" + fs::path(ex.model).stem().string() + ".log"); };
    c.body = [&](RunLog& log, std::ostream& os) {
      const auto model = models::load_component(ex.model);
      const data::Manifest manifest = select_splits(load_manifest(ex.manifest), ex.splits);
      const std::vector<Modality> mods{model.modality};
      const auto store = pipeline::load_features(manifest, mods);
      const auto data = pipeline::component_data(store, manifest, model.modality);
      const auto outputs = models::infer_components(model, data.features);
      const fs::path path = models::directedness_path(ex.out, model.modality);
      data::write_records(path, models::directedness_records(model.modality, data.uids, outputs));
      log.result("utterances", std::to_string(outputs.size()));
      os << "wrote " << outputs.size() << " " << modality_name(model.modality) << " entries to " << path.string()
         << "\n";
    };
  }

  // train-fusion
  struct {
    std::string kind = "el";
    std::string modalities = "acoustic,text,asr,prosody";
    std::string manifest, directedness, out;
    int epochs = 50;
    double lr = 1e-3;
    std::size_t batch = 150;
    double clip = 1.0;
    bool dropout = false;
    std::string dropout_p = "0.3";
    std::string dropout_mode = "sentinel";
    std::uint64_t seed = 1;
  } tf;
  {
    Command& c = add_command("train-fusion", "Train an AVG, SL or EL fusion model on exported directedness features");
    auto& o = *c.options;
    o.add("kind", tf.kind, "avg, sl or el");
    o.add("modalities", tf.modalities, "Fused modalities, e.g. a,t,asr,p");
    o.add("manifest", tf.manifest, "Manifest with train-fus and val-fus splits")->required();
    o.add("directedness", tf.directedness, "Directory of exported <modality>.rec files")->required();
    o.add("out", tf.out, "Model file to write")->required();
    o.add("epochs", tf.epochs, "Training epochs");
    o.add("learning-rate", tf.lr, "Adam learning rate");
    o.add("batch-size", tf.batch, "Mini-batch size");
    o.add("grad-clip", tf.clip, "Gradient norm clip");
    o.flag("modality-dropout", tf.dropout, "Drop whole modalities while training");
    o.add("dropout-p", tf.dropout_p, "Drop probability: one value or four (acoustic,text,asr,prosody)");
    o.add("dropout-mode", tf.dropout_mode, "sentinel or zero");
    o.add("seed", tf.seed, "Random seed");
    c.default_log = [&] { return fs::path(tf.out + ".log"); };
    c.body = [&](RunLog& log, std::ostream& os) {
      const auto kind = fusion::parse_fusion_kind(tf.kind);
      const auto mods = modality_list(tf.modalities);
      const data::Manifest manifest = load_manifest(tf.manifest);
      const auto val = models::ingest_precomputed(require_split(manifest, data::Split::kValFus), tf.directedness, mods);
      fusion::FusionModel model = fusion::build_fusion_model(kind, mods, tf.seed);
      if (kind != fusion::FusionKind::kAvg) {
        const auto train =
            models::ingest_precomputed(require_split(manifest, data::Split::kTrainFus), tf.directedness, mods);
        std::optional<fusion::ModalityDropoutConfig> md;
        if (tf.dropout) {
          md.emplace();
          std::vector<double> p;
          std::stringstream in(tf.dropout_p);
          for (std::string item; std::getline(in, item, ',');) {
            try {
              p.push_back(std::stod(item));
            } catch (const std::exception&) {
              throw UsageError("bad --dropout-p value '" + item + "'");
            }
          }
          if (p.size() == 1) p.assign(kNumModalities, p[0]);
          if (p.size() != kNumModalities) throw UsageError("--dropout-p takes one or four values");
          std::copy(p.begin(), p.end(), md->p.begin());
          if (tf.dropout_mode == "sentinel") {
            md->mode = fusion::DropoutMode::kSentinel;
          } else if (tf.dropout_mode == "zero") {
            md->mode = fusion::DropoutMode::kZero;
          } else {
            throw UsageError("unknown --dropout-mode '" + tf.dropout_mode + "'");
          }
          md->seed = tf.seed + 1;
          md->validate();
        }
        const auto config = train_config(tf.epochs, tf.lr, tf.batch, tf.clip, tf.seed);
        const auto history = fusion::train_fusion(model, train, val, config, md);
        log.result("best_epoch", std::to_string(history.best_epoch));
        os << fusion::fusion_kind_name(kind) << ": best epoch " << history.best_epoch << "\n";
      }
      const auto report = pipeline::evaluate_scores(fusion_scores(model, val), val);
      fusion::save_fusion(model, tf.out);
      log.result("val", eval::summary_line(report));
      os << "val " << eval::summary_line(report) << "\n";
    };
  }

  // corrupt
  struct {
    std::string manifest, directedness, out;
    std::string splits = "all";
    double rate = 0.3;
    std::uint64_t seed = 1;
  } co;
  {
    Command& c = add_command("corrupt", "Drop modalities at random from exported directedness features");
    auto& o = *c.options;
    o.add("manifest", co.manifest, "Manifest")->required();
    o.add("directedness", co.directedness, "Directory of exported <modality>.rec files")->required();
    o.add("out", co.out, "Output directory")->required();
    o.add("splits", co.splits, "all, auto or a comma-separated split list");
    o.add("rate", co.rate, "Per-modality drop probability");
    o.add("seed", co.seed, "Random seed");
    c.default_log = [&] { return fs::path(co.out) / "corrupt.log"; };
    c.body = [&](RunLog& log, std::ostream& os) {
      if (!(co.rate >= 0.0 && co.rate <= 1.0)) throw UsageError("--rate must lie in [0, 1]");
      if (fs::exists(co.out) && fs::equivalent(co.directedness, co.out)) throw UsageError("--out must differ from --directedness");
      const auto mods = modalities_in_dir(co.directedness);
      const data::Manifest manifest = select_splits(load_manifest(co.manifest), co.splits);
      const auto samples = models::ingest_precomputed(manifest, co.directedness, mods);
      const auto corrupted = eval::corrupt_missing(samples, co.rate, co.seed);
      fs::create_directories(co.out);
      for (Modality m : mods) {
        data::write_records(models::directedness_path(co.out, m), models::sample_records(corrupted.samples, m));
        const std::string rate = fixed2(100.0 * corrupted.realized_rate[index_of(m)]);
        log.result(std::string(modality_name(m)) + "_dropped_percent", rate);
        os << modality_name(m) << ": " << rate << "% dropped\n";
      }
    };
  }

  // eval
  struct {
    std::string model, manifest, directedness;
    std::string splits = "auto";
    std::string report, det;
  } ev;
  {
    Command& c = add_command("eval", "Score a component or fusion model and print EER and FA@10%FR");
    auto& o = *c.options;
    o.add("model", ev.model, "Component or fusion model file")->required();
    o.add("manifest", ev.manifest, "Manifest")->required();
    o.add("directedness", ev.directedness, "Directory of <modality>.rec files (fusion models)");
    o.add("splits", ev.splits, "auto (test split when present), all, or a split list");
    o.add("report", ev.report, "Write the report as JSON");
    o.add("det", ev.det, "Write the DET curve as CSV (threshold, FR%, FA%)");
    c.default_log = [&] { return fs::path(ev.report.empty() ? ev.model + ".eval.log" : ev.report + ".log"); };
    c.body = [&](RunLog& log, std::ostream& os) {
      const nn::ModelFile file = nn::load_model(ev.model);
      const auto it = file.metadata.find("model");
      const std::string type = it == file.metadata.end() ? "" : it->second;
      const data::Manifest manifest = select_splits(load_manifest(ev.manifest), ev.splits);
      eval::EvalReport report;
      if (type == "component") {
        report = evaluate_component(models::from_model_file(file), manifest);
      } else if (type == "fusion") {
        if (ev.directedness.empty()) throw UsageError("fusion models need --directedness");
        const fusion::FusionModel model = fusion::from_model_file(file);
        const auto samples = models::ingest_precomputed(manifest, ev.directedness, model.modalities);
        report = pipeline::evaluate_scores(fusion_scores(model, samples), samples);
      } else {
        throw DataError(ev.model + " is neither a component nor a fusion model");
      }
      write_text(ev.report, eval::report_json(report));
      write_text(ev.det, eval::det_csv(report));
      log.result("eer", fixed2(report.eer));
      log.result("fa_at_fr10", fixed2(report.fa_at_fr10));
      os << eval::summary_line(report) << "\n";
    };
  }

  std::vector<std::string> args;
  try {
    args = expand_config(raw_args);
  } catch (const Error& e) {
    err << "error: usage: " << e.what() << "\n";
    return kExitUsage;
  }
  std::vector<char*> argv{const_cast<char*>("ddsd")};
  for (auto& a : args) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << e.what() << "\n";
    return kExitUsage;
  }

  Command* selected = nullptr;
  for (auto& c : commands) {
    if (c.app->parsed()) selected = &c;
  }
  const auto start = std::chrono::steady_clock::now();
  RunLog log;
  std::string status = "ok";
  int code = kExitOk;
  try {
    selected->body(log, out);
  } catch (const UsageError& e) {
    status = std::string("error usage: ") + e.what();
    code = kExitUsage;
  } catch (const NumericError& e) {
    status = std::string("error numeric: ") + e.what();
    code = kExitNumeric;
  } catch (const Error& e) {
    status = std::string("error ") + e.category() + ": " + e.what();
    code = kExitData;
  } catch (const fs::filesystem_error& e) {
    status = std::string("error data: ") + e.what();
    code = kExitData;
  } catch (const std::exception& e) {
    status = std::string("error internal: ") + e.what();
    code = 1;
  }
  if (code != kExitOk) err << "error: " << status.substr(6) << "\n";
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  try {
    const fs::path log_path = selected->log.empty() ? selected->default_log() : fs::path(selected->log);
    log.write(log_path, selected->name, *selected->options, status, seconds);
  } catch (const std::exception& e) {
    // A failed command may not have created its output directory; keep its exit code.
    if (code == kExitOk) {
      err << "error: data: " << e.what() << "\n";
      code = kExitData;
    }
  }
  return code;
}

}  // namespace ddsd::cli
