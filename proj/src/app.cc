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


#include "glowvc/app.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "glowvc/convert.h"
#include "glowvc/error.h"

namespace glowvc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void CheckKeys(const json& j, const std::set<std::string>& allowed,
               const std::string& section) {
  Require(j.is_object(), ErrorCode::kBadConfig, section + " must be an object");
  for (const auto& [key, value] : j.items()) {
    Require(allowed.count(key) > 0, ErrorCode::kBadConfig,
            "unknown key '" + key + "' in " + section);
  }
}

template <typename V>
void Read(const json& j, const char* key, V* out) {
  if (j.contains(key)) *out = j.at(key).get<V>();
}

// Runs a parser and maps JSON type errors to kBadConfig.
template <typename F>
auto Guarded(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    Fail(ErrorCode::kBadConfig, what + ": " + e.what());
  }
}

json ReadJsonFile(const std::string& path) {
  std::ifstream in(path);
  Require(in.good(), ErrorCode::kIo, "cannot open " + path);
  json j = json::parse(in, nullptr, false);
  Require(!j.is_discarded(), ErrorCode::kBadConfig, "invalid JSON in " + path);
  return j;
}

void WriteJsonFile(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  Require(out.good(), ErrorCode::kIo, "cannot write " + path);
  out << j.dump(2) << "\n";
}

template <typename T>
void CopyInto(const Tensor& t, Mat<T>* m, const std::string& name) {
  Require(t.shape.size() == 2 && t.shape[0] == m->rows() &&
              t.shape[1] == m->cols(),
          ErrorCode::kShapeMismatch, "tensor '" + name + "' has the wrong shape");
  *m = t.ToMat().template cast<T>();
}

}  // namespace

// ---------------------------------------------------------------- configs

json ModelConfigToJson(const ModelConfig& c) {
  return {{"variant", std::string(VariantName(c.variant))},
          {"n_mels", c.n_mels},
          {"partition", c.partition},
          {"speaker_dim", c.speaker_dim},
          {"n_speakers", c.n_speakers},
          {"phoneme_vocab", c.phoneme_vocab},
          {"n_languages", c.n_languages},
          {"phoneme_dim", c.phoneme_dim},
          {"language_dim", c.language_dim},
          {"conv_layers", c.conv_layers},
          {"conv_channels", c.conv_channels},
          {"conv_kernel", c.conv_kernel},
          {"dropout", c.dropout},
          {"flow_blocks", c.flow_blocks},
          {"hidden_channels", c.hidden_channels},
          {"coupling_kernel", c.coupling_kernel},
          {"squeeze", c.squeeze},
          {"identity_init", c.identity_init},
          {"seed", c.seed}};
}

ModelConfig ModelConfigFromJson(const json& j) {
  return Guarded("model config", [&] {
    CheckKeys(j,
              {"preset", "variant", "n_mels", "partition", "speaker_dim",
               "n_speakers", "phoneme_vocab", "n_languages", "phoneme_dim",
               "language_dim", "conv_layers", "conv_channels", "conv_kernel",
               "dropout", "flow_blocks", "hidden_channels", "coupling_kernel",
               "squeeze", "identity_init", "seed"},
              "model");
    const Variant variant = j.contains("variant")
                                ? ParseVariant(j.at("variant").get<std::string>())
                                : Variant::kExplicit;
    const std::string preset = j.value("preset", "desk");
    ModelConfig c;
    if (preset == "desk") {
      c = ModelConfig::Desk(variant);
    } else if (preset == "full") {
      c = ModelConfig::Full(variant);
    } else if (preset == "tiny") {
      c = ModelConfig::Tiny(variant);
    } else {
      Fail(ErrorCode::kBadConfig, "unknown model preset '" + preset + "'");
    }
    Read(j, "n_mels", &c.n_mels);
    Read(j, "partition", &c.partition);
    Read(j, "speaker_dim", &c.speaker_dim);
    Read(j, "n_speakers", &c.n_speakers);
    Read(j, "phoneme_vocab", &c.phoneme_vocab);
    Read(j, "n_languages", &c.n_languages);
    Read(j, "phoneme_dim", &c.phoneme_dim);
    Read(j, "language_dim", &c.language_dim);
    Read(j, "conv_layers", &c.conv_layers);
    Read(j, "conv_channels", &c.conv_channels);
    Read(j, "conv_kernel", &c.conv_kernel);
    Read(j, "dropout", &c.dropout);
    Read(j, "flow_blocks", &c.flow_blocks);
    Read(j, "hidden_channels", &c.hidden_channels);
    Read(j, "coupling_kernel", &c.coupling_kernel);
    Read(j, "squeeze", &c.squeeze);
    Read(j, "identity_init", &c.identity_init);
    Read(j, "seed", &c.seed);
    c.Validate();
    return c;
  });
}

json TrainConfigToJson(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"warmup_epochs", c.warmup_epochs},
          {"max_steps", c.max_steps},
          {"seed", c.seed},
          {"clip_gradients", c.clip_gradients},
          {"clip_norm", c.clip_norm},
          {"checkpoint_every", c.checkpoint_every},
          {"zero_wall_time", c.zero_wall_time}};
}

TrainConfig TrainConfigFromJson(const json& j, TrainConfig base) {
  return Guarded("train config", [&] {
    CheckKeys(j,
              {"batch_size", "learning_rate", "warmup_epochs", "max_steps",
               "seed", "clip_gradients", "clip_norm", "checkpoint_every",
               "zero_wall_time"},
              "train");
    TrainConfig c = base;
    Read(j, "batch_size", &c.batch_size);
    Read(j, "learning_rate", &c.learning_rate);
    Read(j, "warmup_epochs", &c.warmup_epochs);
    Read(j, "max_steps", &c.max_steps);
    Read(j, "seed", &c.seed);
    Read(j, "clip_gradients", &c.clip_gradients);
    Read(j, "clip_norm", &c.clip_norm);
    Read(j, "checkpoint_every", &c.checkpoint_every);
    Read(j, "zero_wall_time", &c.zero_wall_time);
    c.Validate();
    return c;
  });
}

json SynthConfigToJson(const SynthConfig& c) {
  return {{"n_speakers", c.n_speakers},
          {"n_languages", c.n_languages},
          {"utterances_per_speaker", c.utterances_per_speaker},
          {"phoneme_vocab_size", c.phoneme_vocab_size},
          {"min_phonemes", c.min_phonemes},
          {"max_phonemes", c.max_phonemes},
          {"min_duration", c.min_duration},
          {"max_duration", c.max_duration},
          {"n_mels", c.n_mels},
          {"content_dim", c.content_dim},
          {"speaker_dim", c.speaker_dim},
          {"noise_std", c.noise_std},
          {"content_noise_std", c.content_noise_std},
          {"language_scale", c.language_scale},
          {"identity_mixing", c.identity_mixing},
          {"min_speaker_distance", c.min_speaker_distance},
          {"held_out_fraction", c.held_out_fraction},
          {"seed", c.seed}};
}

SynthConfig SynthConfigFromJson(const json& j) {
  return Guarded("synth config", [&] {
    CheckKeys(j,
              {"n_speakers", "n_languages", "utterances_per_speaker",
               "phoneme_vocab_size", "min_phonemes", "max_phonemes",
               "min_duration", "max_duration", "n_mels", "content_dim",
               "speaker_dim", "noise_std", "content_noise_std",
               "language_scale", "identity_mixing", "min_speaker_distance",
               "held_out_fraction", "seed"},
              "synth");
    SynthConfig c;
    Read(j, "n_speakers", &c.n_speakers);
    Read(j, "n_languages", &c.n_languages);
    Read(j, "utterances_per_speaker", &c.utterances_per_speaker);
    Read(j, "phoneme_vocab_size", &c.phoneme_vocab_size);
    Read(j, "min_phonemes", &c.min_phonemes);
    Read(j, "max_phonemes", &c.max_phonemes);
    Read(j, "min_duration", &c.min_duration);
    Read(j, "max_duration", &c.max_duration);
    Read(j, "n_mels", &c.n_mels);
    Read(j, "content_dim", &c.content_dim);
    Read(j, "speaker_dim", &c.speaker_dim);
    Read(j, "noise_std", &c.noise_std);
    Read(j, "content_noise_std", &c.content_noise_std);
    Read(j, "language_scale", &c.language_scale);
    Read(j, "identity_mixing", &c.identity_mixing);
    Read(j, "min_speaker_distance", &c.min_speaker_distance);
    Read(j, "held_out_fraction", &c.held_out_fraction);
    Read(j, "seed", &c.seed);
    c.Validate();
    return c;
  });
}

namespace {

json StftToJson(const StftConfig& c) {
  return {{"window", c.window},   {"hop", c.hop},     {"fft_size", c.fft_size},
          {"n_mels", c.n_mels},   {"f_min", c.f_min}, {"f_max", c.f_max},
          {"amplitude_floor", c.amplitude_floor}};
}

json F0ToJson(const F0Config& c) {
  return {{"window", c.window},
          {"hop", c.hop},
          {"f_min", c.f_min},
          {"f_max", c.f_max},
          {"voicing_threshold", c.voicing_threshold},
          {"rms_floor", c.rms_floor}};
}

FeatureConfig FeaturesFromJson(const json& j) {
  CheckKeys(j, {"stft", "f0"}, "features");
  FeatureConfig c;
  if (j.contains("stft")) {
    const json& s = j.at("stft");
    CheckKeys(s, {"window", "hop", "fft_size", "n_mels", "f_min", "f_max",
                  "amplitude_floor"},
              "features.stft");
    Read(s, "window", &c.stft.window);
    Read(s, "hop", &c.stft.hop);
    Read(s, "fft_size", &c.stft.fft_size);
    Read(s, "n_mels", &c.stft.n_mels);
    Read(s, "f_min", &c.stft.f_min);
    Read(s, "f_max", &c.stft.f_max);
    Read(s, "amplitude_floor", &c.stft.amplitude_floor);
  }
  if (j.contains("f0")) {
    const json& f = j.at("f0");
    CheckKeys(f, {"window", "hop", "f_min", "f_max", "voicing_threshold",
                  "rms_floor"},
              "features.f0");
    Read(f, "window", &c.f0.window);
    Read(f, "hop", &c.f0.hop);
    Read(f, "f_min", &c.f0.f_min);
    Read(f, "f_max", &c.f0.f_max);
    Read(f, "voicing_threshold", &c.f0.voicing_threshold);
    Read(f, "rms_floor", &c.f0.rms_floor);
  }
  Require(c.stft.window >= 1 && c.stft.hop >= 1 &&
              c.stft.fft_size >= c.stft.window && c.stft.n_mels >= 1 &&
              c.stft.f_max > c.stft.f_min && c.stft.amplitude_floor > 0.0,
          ErrorCode::kBadConfig, "invalid stft settings");
  Require(c.f0.window == c.stft.window && c.f0.hop == c.stft.hop,
          ErrorCode::kBadConfig, "f0 framing must match the stft framing");
  Require(c.f0.f_min > 0.0 && c.f0.f_max > c.f0.f_min, ErrorCode::kBadConfig,
          "invalid f0 range");
  return c;
}

}  // namespace

RunConfig RunConfig::FromJson(const json& j) {
  return Guarded("run config", [&] {
    CheckKeys(j, {"data", "model", "train", "features", "synth"}, "config");
    RunConfig c;
    if (j.contains("data")) {
      CheckKeys(j.at("data"), {"dir"}, "data");
      Read(j.at("data"), "dir", &c.data_dir);
    }
    if (j.contains("model")) c.model = ModelConfigFromJson(j.at("model"));
    if (j.contains("train")) c.train = TrainConfigFromJson(j.at("train"));
    if (j.contains("features")) c.features = FeaturesFromJson(j.at("features"));
    if (j.contains("synth")) c.synth = SynthConfigFromJson(j.at("synth"));
    return c;
  });
}

RunConfig RunConfig::Load(const std::string& path) {
  return FromJson(ReadJsonFile(path));
}

json RunConfig::ToJson() const {
  return {{"data", {{"dir", data_dir}}},
          {"model", ModelConfigToJson(model)},
          {"train", TrainConfigToJson(train)},
          {"features",
           {{"stft", StftToJson(features.stft)}, {"f0", F0ToJson(features.f0)}}},
          {"synth", SynthConfigToJson(synth)}};
}

// ------------------------------------------------------------ checkpoints

Container CheckpointToContainer(GlowVcModel<float>& model,
                                const OptimizerState<float>* optimizer) {
  Container c;
  c.meta["kind"] = "checkpoint";
  c.meta["model"] = ModelConfigToJson(model.config());
  const ParamList<float> params = model.Params();
  for (const auto& p : params)
    c.tensors["param/" + p.name] = Tensor::FromMat(p.param->value);
  for (const auto& b : model.Buffers())
    c.tensors["buffer/" + b.name] = Tensor::FromMat(*b.value);
  if (optimizer) {
    Require(optimizer->m.size() == params.size(), ErrorCode::kShapeMismatch,
            "optimizer state does not match the model");
    c.meta["optimizer"] = {{"kind", "adamax"}, {"step", optimizer->step}};
    for (size_t k = 0; k < params.size(); ++k) {
      c.tensors["adamax/m/" + params[k].name] = Tensor::FromMat(optimizer->m[k]);
      c.tensors["adamax/u/" + params[k].name] = Tensor::FromMat(optimizer->u[k]);
    }
  }
  return c;
}

Checkpoint CheckpointFromContainer(const Container& c) {
  Require(c.meta.value("kind", "") == "checkpoint" && c.meta.contains("model"),
          ErrorCode::kCorruptIndex, "container is not a checkpoint");
  Checkpoint ck;
  ck.model = GlowVcModel<float>(ModelConfigFromJson(c.meta.at("model")));
  const ParamList<float> params = ck.model.Params();
  for (const auto& p : params)
    CopyInto(c.Get("param/" + p.name), &p.param->value, p.name);
  for (const auto& p : params) p.param->ZeroGrad();
  for (const auto& b : ck.model.Buffers())
    CopyInto(c.Get("buffer/" + b.name), b.value, b.name);
  if (c.meta.contains("optimizer")) {
    OptimizerState<float> s = OptimizerState<float>::Zeros(params);
    s.step = Guarded("optimizer", [&] {
      return c.meta.at("optimizer").at("step").get<int64_t>();
    });
    for (size_t k = 0; k < params.size(); ++k) {
      CopyInto(c.Get("adamax/m/" + params[k].name), &s.m[k], params[k].name);
      CopyInto(c.Get("adamax/u/" + params[k].name), &s.u[k], params[k].name);
    }
    ck.optimizer = std::move(s);
  }
  return ck;
}

void SaveCheckpoint(const std::string& path, GlowVcModel<float>& model,
                    const OptimizerState<float>* optimizer) {
  WriteContainer(path, CheckpointToContainer(model, optimizer));
}

Checkpoint LoadCheckpoint(const std::string& path) {
  return CheckpointFromContainer(ReadContainer(path));
}

// ---------------------------------------------------------- feature files

Container FeatureFileToContainer(const FeatureFile& f) {
  Require(static_cast<Index>(f.f0_norm.size()) == f.mel.rows() ||
              f.f0_norm.empty(),
          ErrorCode::kShapeMismatch, "f0 track length does not match mel");
  Container c;
  c.meta = {{"kind", "features"},
            {"utterance_id", f.utterance_id},
            {"speaker_id", f.speaker_id},
            {"language_id", f.language_id}};
  c.tensors["mel"] = Tensor::FromMat(f.mel);
  c.tensors["f0_norm"] = Tensor::FromVector(f.f0_norm);
  return c;
}

FeatureFile FeatureFileFromContainer(const Container& c) {
  Require(c.meta.value("kind", "") == "features", ErrorCode::kCorruptIndex,
          "container is not a feature file");
  FeatureFile f;
  Guarded("feature header", [&] {
    f.utterance_id = c.meta.at("utterance_id").get<std::string>();
    f.speaker_id = c.meta.at("speaker_id").get<int>();
    f.language_id = c.meta.at("language_id").get<int>();
    return 0;
  });
  const Tensor& mel = c.Get("mel");
  Require(mel.shape.size() == 2, ErrorCode::kShapeMismatch, "mel must be 2-d");
  f.mel = mel.ToMat();
  const Tensor& f0 = c.Get("f0_norm");
  Require(f0.shape.size() == 1, ErrorCode::kShapeMismatch, "f0_norm must be 1-d");
  f.f0_norm = f0.data;
  Require(f.f0_norm.empty() || static_cast<Index>(f.f0_norm.size()) == f.mel.rows(),
          ErrorCode::kShapeMismatch, "f0 track length does not match mel");
  return f;
}

void SaveFeatureFile(const std::string& path, const FeatureFile& f) {
  WriteContainer(path, FeatureFileToContainer(f));
}

FeatureFile LoadFeatureFile(const std::string& path) {
  return FeatureFileFromContainer(ReadContainer(path));
}

FeatureFile ExtractFeatures(const WaveForm& wave, const FeatureConfig& cfg,
                            const std::string& utterance_id) {
  FeatureFile f;
  f.utterance_id = utterance_id;
  f.mel = ComputeMelSpectrogram(wave, cfg.stft).frames;
  f.f0_norm = NormalizeF0(EstimateF0(wave, cfg.f0)).values;
  return f;
}

// ------------------------------------------------------------- corpora

void SaveCorpus(const std::string& dir, const SyntheticCorpus& corpus) {
  fs::create_directories(fs::path(dir) / "features");
  json utterances = json::array();
  for (const SynthUtterance& u : corpus.utterances) {
    const std::string rel = "features/" + u.id + ".gvck";
    FeatureFile f;
    f.utterance_id = u.id;
    f.speaker_id = u.speaker_id;
    f.language_id = u.content.language_id;
    f.mel = u.mel;
    f.f0_norm = u.pitch.values;
    SaveFeatureFile((fs::path(dir) / rel).string(), f);
    utterances.push_back({{"id", u.id},
                          {"speaker_id", u.speaker_id},
                          {"language_id", u.content.language_id},
                          {"phoneme_ids", u.content.phoneme_ids},
                          {"durations", u.content.durations},
                          {"split", u.held_out ? "test" : "train"},
                          {"features", rel}});
  }
  const SynthConfig& cfg = corpus.config;
  WriteJsonFile((fs::path(dir) / "manifest.json").string(),
                {{"version", 1},
                 {"n_speakers", cfg.n_speakers},
                 {"n_languages", cfg.n_languages},
                 {"phoneme_vocab", cfg.phoneme_vocab_size},
                 {"n_mels", cfg.n_mels},
                 {"synth", SynthConfigToJson(cfg)},
                 {"utterances", utterances}});
  json phonemes = json::object();
  for (size_t i = 0; i < corpus.phoneme_symbols.size(); ++i)
    phonemes[corpus.phoneme_symbols[i]] = i;
  WriteJsonFile((fs::path(dir) / "phonemes.json").string(), phonemes);
  json languages = json::object();
  for (size_t i = 0; i < corpus.language_symbols.size(); ++i)
    languages[corpus.language_symbols[i]] = i;
  WriteJsonFile((fs::path(dir) / "languages.json").string(), languages);

  const GeneratorFactors& g = corpus.factors;
  Container factors;
  factors.meta = {{"kind", "generator_factors"}};
  factors.tensors["speaker_vectors"] = Tensor::FromMat(g.speaker_vectors.cast<float>());
  factors.tensors["phoneme_vectors"] = Tensor::FromMat(g.phoneme_vectors.cast<float>());
  factors.tensors["language_vectors"] = Tensor::FromMat(g.language_vectors.cast<float>());
  factors.tensors["mixing"] = Tensor::FromMat(g.mixing.cast<float>());
  factors.tensors["bias"] = Tensor::FromMat(g.bias.cast<float>());
  WriteContainer((fs::path(dir) / "factors.gvck").string(), factors);
}

namespace {

std::vector<std::string> ReadVocab(const std::string& path) {
  const json j = ReadJsonFile(path);
  Require(j.is_object(), ErrorCode::kBadConfig, path + " must be an object");
  std::vector<std::string> symbols(j.size());
  for (const auto& [symbol, id] : j.items()) {
    const auto k = id.get<size_t>();
    Require(k < symbols.size() && symbols[k].empty(), ErrorCode::kBadConfig,
            "vocabulary ids in " + path + " must be dense and unique");
    symbols[k] = symbol;
  }
  return symbols;
}

}  // namespace

SyntheticCorpus LoadCorpus(const std::string& dir) {
  const fs::path root(dir);
  const json manifest = ReadJsonFile((root / "manifest.json").string());
  return Guarded("manifest", [&] {
    SyntheticCorpus corpus;
    corpus.config = SynthConfigFromJson(manifest.at("synth"));
    corpus.phoneme_symbols = ReadVocab((root / "phonemes.json").string());
    corpus.language_symbols = ReadVocab((root / "languages.json").string());
    for (const json& e : manifest.at("utterances")) {
      SynthUtterance u;
      u.id = e.at("id").get<std::string>();
      u.speaker_id = e.at("speaker_id").get<int>();
      u.content.language_id = e.at("language_id").get<int>();
      u.content.phoneme_ids = e.at("phoneme_ids").get<std::vector<int>>();
      u.content.durations = e.at("durations").get<std::vector<int>>();
      u.held_out = e.at("split").get<std::string>() == "test";
      u.content.Validate(static_cast<Index>(corpus.phoneme_symbols.size()),
                         static_cast<Index>(corpus.language_symbols.size()));
      const FeatureFile f =
          LoadFeatureFile((root / e.at("features").get<std::string>()).string());
      Require(f.mel.rows() == u.content.TotalFrames(), ErrorCode::kShapeMismatch,
              "durations of " + u.id + " do not match its features");
      u.mel = f.mel;
      u.pitch.values = f.f0_norm;
      corpus.utterances.push_back(std::move(u));
    }
    const fs::path factors_path = root / "factors.gvck";
    if (fs::exists(factors_path)) {
      const Container fc = ReadContainer(factors_path.string());
      GeneratorFactors& g = corpus.factors;
      g.speaker_vectors = fc.Get("speaker_vectors").ToMat().cast<double>();
      g.phoneme_vectors = fc.Get("phoneme_vectors").ToMat().cast<double>();
      g.language_vectors = fc.Get("language_vectors").ToMat().cast<double>();
      g.mixing = fc.Get("mixing").ToMat().cast<double>();
      g.bias = fc.Get("bias").ToMat().cast<double>();
    }
    return corpus;
  });
}

std::vector<TrainingExample> ToTrainingExamples(const SyntheticCorpus& corpus,
                                                bool held_out) {
  std::vector<TrainingExample> out;
  for (const SynthUtterance& u : corpus.utterances) {
    if (u.held_out != held_out) continue;
    TrainingExample e;
    e.id = u.id;
    e.mel = u.mel;
    e.content = u.content;
    e.pitch = u.pitch.values;
    e.speaker_id = u.speaker_id;
    out.push_back(std::move(e));
  }
  return out;
}

// ------------------------------------------------------------ evaluation

double ModelBitsPerDim(const GlowVcModel<float>& model,
                       std::span<const TrainingExample> examples) {
  Require(!examples.empty(), ErrorCode::kInsufficientData, "no examples");
  double nll = 0.0;
  Index frames = 0;
  for (const TrainingExample& e : examples) {
    const ConditioningBundle bundle{e.content, NormalizedPitch{e.pitch},
                                    model.Speaker(e.speaker_id)};
    nll += Nll<float>(e.mel, bundle, model);
    frames += ValidFrames(model, e.mel.rows());
  }
  return BitsPerDim(nll, frames, model.config().n_mels);
}

json EvalReport::ToJson() const {
  return {{"variant", variant},
          {"pairs", pairs},
          {"speaker_transfer_accuracy", speaker_transfer_accuracy},
          {"content_preservation_score", content_preservation_score},
          {"bits_per_dim", bits_per_dim},
          {"baseline_bits_per_dim", baseline_bits_per_dim}};
}

EvalReport EvaluateModel(const GlowVcModel<float>& model,
                         const SyntheticCorpus& corpus, int pairs,
                         uint64_t seed) {
  Require(pairs >= 1, ErrorCode::kBadConfig, "pairs must be >= 1");
  const std::vector<TrainingExample> train = ToTrainingExamples(corpus, false);
  const std::vector<TrainingExample> test = ToTrainingExamples(corpus, true);
  Require(!train.empty() && !test.empty(), ErrorCode::kInsufficientData,
          "evaluation needs both train and held-out utterances");
  const int n_speakers = static_cast<int>(model.num_speakers());
  Require(n_speakers >= 2, ErrorCode::kInsufficientData,
          "conversion needs at least two speakers");

  std::vector<LabelledFeatures> reference;
  for (const auto& e : test) reference.push_back({&e.mel, e.speaker_id});
  const SpeakerCentroids centroids = SpeakerCentroids::Fit(reference);

  std::mt19937_64 rng(seed);
  std::vector<Mat<float>> outputs;
  std::vector<int> targets;
  std::vector<const Mat<float>*> sources;
  outputs.reserve(static_cast<size_t>(pairs));
  for (int k = 0; k < pairs; ++k) {
    const TrainingExample& src = test[rng() % test.size()];
    const int offset = 1 + static_cast<int>(rng() % (n_speakers - 1));
    const int target = (src.speaker_id + offset) % n_speakers;
    const SpeakerEmbedding tgt = model.Speaker(target);
    outputs.push_back(
        model.is_explicit()
            ? ConvertExplicit<float>(model, src.mel, tgt)
            : ConvertConditional<float>(model, src.mel,
                                        model.Speaker(src.speaker_id), tgt));
    targets.push_back(target);
    sources.push_back(&src.mel);
  }
  std::vector<LabelledFeatures> converted;
  std::vector<const Mat<float>*> converted_ptrs;
  for (int k = 0; k < pairs; ++k) {
    converted.push_back({&outputs[k], targets[k]});
    converted_ptrs.push_back(&outputs[k]);
  }

  std::vector<const Mat<float>*> train_mels, test_mels;
  for (const auto& e : train) train_mels.push_back(&e.mel);
  for (const auto& e : test) test_mels.push_back(&e.mel);

  EvalReport r;
  r.variant = std::string(VariantName(model.variant()));
  r.pairs = pairs;
  r.speaker_transfer_accuracy = SpeakerTransferAccuracy(converted, centroids);
  if (corpus.factors.mixing.size() > 0)
    r.content_preservation_score =
        ContentPreservationScore(sources, converted_ptrs, corpus.factors);
  r.bits_per_dim = ModelBitsPerDim(model, test);
  r.baseline_bits_per_dim = DiagonalGaussian::Fit(train_mels).BitsPerDim(test_mels);
  return r;
}

}  // namespace glowvc
