// Copyright (c) 2026 The GlowVC Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "cli.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "glowvc/app.h"
#include "glowvc/convert.h"
#include "glowvc/error.h"

namespace glowvc {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// A usage error detected after argument parsing.
struct UsageError {
  std::string message;
};

json ReadConfigJson(const std::string& path) {
  std::ifstream in(path);
  Require(in.good(), ErrorCode::kIo, "cannot open " + path);
  json j = json::parse(in, nullptr, false);
  Require(!j.is_discarded(), ErrorCode::kBadConfig, "invalid JSON in " + path);
  return j;
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  Require(out.good(), ErrorCode::kIo, "cannot write " + path);
  out << text;
}

bool IsWav(const std::string& path) {
  std::string ext = fs::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == ".wav";
}

// ------------------------------------------------------------ synth-data

struct SynthArgs {
  std::string config, out;
  std::optional<uint64_t> seed;
};

void RunSynth(const SynthArgs& a) {
  RunConfig cfg = RunConfig::Load(a.config);
  if (a.seed) cfg.synth.seed = *a.seed;
  const SyntheticCorpus corpus = GenerateCorpus(cfg.synth);
  SaveCorpus(a.out, corpus);
  std::cerr << "wrote " << corpus.utterances.size() << " utterances to "
            << a.out << "\n";
}

// ------------------------------------------------------ extract-features

struct ExtractArgs {
  std::string wav_dir, out, config;
};

void RunExtract(const ExtractArgs& a) {
  FeatureConfig features;
  if (!a.config.empty()) features = RunConfig::Load(a.config).features;
  std::vector<fs::path> wavs;
  for (const auto& entry : fs::directory_iterator(a.wav_dir))
    if (entry.is_regular_file() && IsWav(entry.path().string()))
      wavs.push_back(entry.path());
  std::sort(wavs.begin(), wavs.end());
  Require(!wavs.empty(), ErrorCode::kInsufficientData,
          "no .wav files in " + a.wav_dir);
  fs::create_directories(a.out);
  for (const fs::path& wav : wavs) {
    const std::string id = wav.stem().string();
    const FeatureFile f = ExtractFeatures(LoadWav(wav.string()), features, id);
    SaveFeatureFile((fs::path(a.out) / (id + ".gvck")).string(), f);
  }
  std::cerr << "extracted " << wavs.size() << " files to " << a.out << "\n";
}

// ----------------------------------------------------------------- train

struct TrainArgs {
  std::string config, data, out, variant, metrics, resume;
  std::optional<int> max_steps;
};

void RunTrain(const TrainArgs& a) {
  json j = ReadConfigJson(a.config);
  if (!a.variant.empty()) {
    ParseVariant(a.variant);
    if (!j.contains("model")) j["model"] = json::object();
    j["model"]["variant"] = a.variant;
  }
  // Validates every section, including the latent partition, before any
  // data is read.
  RunConfig cfg = RunConfig::FromJson(j);
  if (a.max_steps) cfg.train.max_steps = *a.max_steps;
  cfg.train.Validate();
  const std::string data_dir = a.data.empty() ? cfg.data_dir : a.data;
  Require(!data_dir.empty(), ErrorCode::kBadConfig, "no data directory given");

  const SyntheticCorpus corpus = LoadCorpus(data_dir);
  cfg.model.n_speakers = corpus.config.n_speakers;
  cfg.model.phoneme_vocab = static_cast<Index>(corpus.phoneme_symbols.size());
  cfg.model.n_languages = static_cast<Index>(corpus.language_symbols.size());
  cfg.model.Validate();
  Require(cfg.model.n_mels == corpus.config.n_mels, ErrorCode::kShapeMismatch,
          "model n_mels does not match the corpus");
  const std::vector<TrainingExample> data = ToTrainingExamples(corpus, false);

  GlowVcModel<float> model(cfg.model);
  std::optional<OptimizerState<float>> resume;
  if (!a.resume.empty()) {
    Checkpoint ck = LoadCheckpoint(a.resume);
    model = std::move(ck.model);
    resume = std::move(ck.optimizer);
  }

  const std::string metrics_path =
      a.metrics.empty() ? a.out + ".metrics.ndjson" : a.metrics;
  std::ofstream metrics(metrics_path, std::ios::trunc);
  Require(metrics.good(), ErrorCode::kIo, "cannot write " + metrics_path);
  TrainHooks hooks;
  hooks.on_step = [&](const StepMetrics& m) {
    metrics << FormatMetrics(m) << "\n";
  };
  hooks.on_checkpoint = [&](int64_t step, GlowVcModel<float>& m,
                            const OptimizerState<float>& state) {
    const bool final = step >= cfg.train.max_steps;
    const std::string path =
        final ? a.out : a.out + ".step" + std::to_string(step);
    SaveCheckpoint(path, m, &state);
  };
  const TrainResult r = Train(model, data, cfg.train, hooks,
                              resume ? &*resume : nullptr);
  if (!r.metrics.empty()) {
    std::cerr << "step " << r.metrics.back().step
              << " nll " << r.metrics.back().nll
              << " bits/dim " << r.metrics.back().bits_per_dim << "\n";
  }
}

// --------------------------------------------------------------- convert

struct ConvertArgs {
  std::string ckpt, input, out;
  int target = -1;
  std::optional<int> source;
  double speaker_temperature = 0.0;
  uint64_t seed = 0;
};

void RunConvert(const ConvertArgs& a) {
  const Checkpoint ck = LoadCheckpoint(a.ckpt);
  const GlowVcModel<float>& model = ck.model;
  if (model.is_explicit() && a.source)
    throw UsageError{"--source-speaker is not accepted for explicit checkpoints"};
  if (!model.is_explicit() && !a.source)
    throw UsageError{"--source-speaker is required for conditional checkpoints"};
  if (!model.is_explicit() && a.speaker_temperature != 0.0)
    throw UsageError{"--speaker-temperature applies to explicit checkpoints only"};

  FeatureFile in = IsWav(a.input)
                       ? ExtractFeatures(LoadWav(a.input), FeatureConfig{},
                                         fs::path(a.input).stem().string())
                       : LoadFeatureFile(a.input);
  Require(in.mel.cols() == model.config().n_mels, ErrorCode::kShapeMismatch,
          "input features have " + std::to_string(in.mel.cols()) +
              " channels, model expects " +
              std::to_string(model.config().n_mels));
  FeatureFile out;
  out.utterance_id = in.utterance_id + ".to" + std::to_string(a.target);
  out.speaker_id = a.target;
  out.language_id = in.language_id;
  const SpeakerEmbedding target = model.Speaker(a.target);
  out.mel = model.is_explicit()
                ? ConvertExplicit<float>(model, in.mel, target,
                                         a.speaker_temperature, a.seed)
                : ConvertConditional<float>(model, in.mel,
                                            model.Speaker(*a.source), target);
  SaveFeatureFile(a.out, out);
}

// ------------------------------------------------------------------- tts

struct TtsArgs {
  std::string ckpt, entry, data, out;
  double temperature = 1.0;
  uint64_t seed = 0;
};

void RunTts(const TtsArgs& a) {
  const Checkpoint ck = LoadCheckpoint(a.ckpt);
  const SyntheticCorpus corpus = LoadCorpus(a.data);
  const auto it = std::find_if(
      corpus.utterances.begin(), corpus.utterances.end(),
      [&](const SynthUtterance& u) { return u.id == a.entry; });
  Require(it != corpus.utterances.end(), ErrorCode::kInsufficientData,
          "no manifest entry '" + a.entry + "'");
  const ConditioningBundle bundle{it->content, it->pitch,
                                  ck.model.Speaker(it->speaker_id)};
  FeatureFile out;
  out.utterance_id = it->id + ".tts";
  out.speaker_id = it->speaker_id;
  out.language_id = it->content.language_id;
  out.mel = TtsInfer<float>(bundle, ck.model, a.temperature, a.seed);
  out.f0_norm = it->pitch.values;
  SaveFeatureFile(a.out, out);
}

// ------------------------------------------------------------------ eval

struct EvalArgs {
  std::string ckpt, data, report;
  int pairs = 100;
  uint64_t seed = 0;
};

void RunEval(const EvalArgs& a) {
  const Checkpoint ck = LoadCheckpoint(a.ckpt);
  const SyntheticCorpus corpus = LoadCorpus(a.data);
  const EvalReport r = EvaluateModel(ck.model, corpus, a.pairs, a.seed);
  WriteText(a.report, r.ToJson().dump(2) + "\n");
  std::cerr << "speaker_transfer_accuracy " << r.speaker_transfer_accuracy
            << " content_preservation_score " << r.content_preservation_score
            << " bits_per_dim " << r.bits_per_dim << " (baseline "
            << r.baseline_bits_per_dim << ")\n";
}

// ------------------------------------------------------------- gradcheck

struct GradCheckArgs {
  std::string config;
  uint64_t seed = 0;
};

bool RunGradCheck(const GradCheckArgs& a) {
  const RunConfig cfg = RunConfig::Load(a.config);
  GlowVcModel<double> model(cfg.model);
  const Index lengths[] = {5, 4};
  const std::vector<TrainingExample> data =
      RandomTrainingExamples(cfg.model, lengths, a.seed);
  std::vector<const TrainingExample*> batch;
  for (const auto& e : data) batch.push_back(&e);
  InitializeActNorm<double>(model, batch);
  PerturbParams(model.Params(), 0.1, a.seed + 1);
  PassOptions opt;
  opt.training = true;
  opt.dropout_seed = a.seed + 2;
  const GradCheckReport r = GradCheck(model, batch, opt);
  std::cout << "parameters " << r.params << " failures " << r.failures
            << " max_rel_error " << r.max_rel_error << "\n";
  for (const auto& e : r.entries) {
    if (!e.ok)
      std::cerr << "mismatch " << e.name << "[" << e.index << "] analytic "
                << e.analytic << " numeric " << e.numeric << "\n";
  }
  return r.passed() && r.max_rel_error < 1e-3;
}

}  // namespace

int RunCli(int argc, const char* const* argv) {
  CLI::App app{"GlowVC flow-based voice conversion"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth-data", "Generate a synthetic corpus");
  s->add_option("--config", synth.config, "Run configuration")->required();
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--seed", synth.seed, "Override the corpus seed");

  ExtractArgs extract;
  auto* x = app.add_subcommand("extract-features", "WAV files to feature files");
  x->add_option("--wav-dir", extract.wav_dir, "Directory of .wav files")->required();
  x->add_option("--out", extract.out, "Output directory")->required();
  x->add_option("--config", extract.config, "Run configuration (features section)");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a model");
  t->add_option("--config", train.config, "Run configuration")->required();
  t->add_option("--data", train.data, "Corpus directory");
  t->add_option("--out", train.out, "Output checkpoint")->required();
  t->add_option("--variant", train.variant, "conditional or explicit")
      ->check(CLI::IsMember({"conditional", "explicit"}));
  t->add_option("--max-steps", train.max_steps, "Override max_steps");
  t->add_option("--metrics", train.metrics, "NDJSON metrics log");
  t->add_option("--resume", train.resume, "Checkpoint to continue from");

  ConvertArgs convert;
  auto* c = app.add_subcommand("convert", "Convert one utterance");
  c->add_option("--ckpt", convert.ckpt, "Checkpoint")->required();
  c->add_option("--input", convert.input, "Feature file or .wav")->required();
  c->add_option("--target-speaker", convert.target, "Target speaker id")->required();
  c->add_option("--source-speaker", convert.source, "Source speaker id");
  c->add_option("--speaker-temperature", convert.speaker_temperature,
                "Noise on the speaker block (explicit)");
  c->add_option("--seed", convert.seed, "Seed for speaker-block noise");
  c->add_option("--out", convert.out, "Output feature file")->required();

  TtsArgs tts;
  auto* y = app.add_subcommand("tts", "Generate features from conditioning");
  y->add_option("--ckpt", tts.ckpt, "Checkpoint")->required();
  y->add_option("--manifest-entry", tts.entry, "Utterance id")->required();
  y->add_option("--data", tts.data, "Corpus directory")->required();
  y->add_option("--out", tts.out, "Output feature file")->required();
  y->add_option("--temperature", tts.temperature, "Sampling temperature");
  y->add_option("--seed", tts.seed, "Sampling seed");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Evaluate conversions on held-out data");
  e->add_option("--ckpt", eval.ckpt, "Checkpoint")->required();
  e->add_option("--data", eval.data, "Corpus directory")->required();
  e->add_option("--report", eval.report, "Output JSON report")->required();
  e->add_option("--pairs", eval.pairs, "Number of conversions");
  e->add_option("--seed", eval.seed, "Pair sampling seed");

  GradCheckArgs gradcheck;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  g->add_option("--config", gradcheck.config, "Run configuration")->required();
  g->add_option("--seed", gradcheck.seed, "Data and perturbation seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kExitUsage;
  }

  try {
    if (*s) RunSynth(synth);
    if (*x) RunExtract(extract);
    if (*t) RunTrain(train);
    if (*c) RunConvert(convert);
    if (*y) RunTts(tts);
    if (*e) RunEval(eval);
    if (*g) return RunGradCheck(gradcheck) ? 0 : kExitRuntime;
  } catch (const UsageError& ex) {
    std::cerr << "usage error: " << ex.message << "\n"
              << app.get_subcommands().front()->help();
    return kExitUsage;
  } catch (const Error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}

}  // namespace glowvc
