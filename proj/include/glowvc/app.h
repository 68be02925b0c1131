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


// Checkpoints, feature files, on-disk corpora and the JSON run configuration.

#ifndef GLOWVC_APP_H_
#define GLOWVC_APP_H_

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "glowvc/container.h"
#include "glowvc/features.h"
#include "glowvc/model.h"
#include "glowvc/synthlab.h"
#include "glowvc/train.h"

namespace glowvc {

// ---------------------------------------------------------------- configs

// JSON (de)serialization. Parsing rejects unknown keys with kBadConfig and
// validates the result.
nlohmann::json ModelConfigToJson(const ModelConfig& c);
ModelConfig ModelConfigFromJson(const nlohmann::json& j);
nlohmann::json TrainConfigToJson(const TrainConfig& c);
TrainConfig TrainConfigFromJson(const nlohmann::json& j,
                                TrainConfig base = TrainConfig::Desk());
nlohmann::json SynthConfigToJson(const SynthConfig& c);
SynthConfig SynthConfigFromJson(const nlohmann::json& j);

struct FeatureConfig {
  StftConfig stft;
  F0Config f0;
};

// Sections: data, model, train, features, synth. Every section and key is
// optional; absent keys keep their defaults. The model section may name a
// "preset" (desk, full, tiny) that the other keys then override.
struct RunConfig {
  std::string data_dir;
  ModelConfig model = ModelConfig::Desk(Variant::kExplicit);
  TrainConfig train = TrainConfig::Desk();
  FeatureConfig features;
  SynthConfig synth;

  static RunConfig FromJson(const nlohmann::json& j);
  static RunConfig Load(const std::string& path);
  nlohmann::json ToJson() const;
};

// ------------------------------------------------------------ checkpoints

struct Checkpoint {
  GlowVcModel<float> model;
  std::optional<OptimizerState<float>> optimizer;
};

Container CheckpointToContainer(GlowVcModel<float>& model,
                                const OptimizerState<float>* optimizer);
Checkpoint CheckpointFromContainer(const Container& c);

void SaveCheckpoint(const std::string& path, GlowVcModel<float>& model,
                    const OptimizerState<float>* optimizer = nullptr);
Checkpoint LoadCheckpoint(const std::string& path);

// ---------------------------------------------------------- feature files

struct FeatureFile {
  std::string utterance_id;
  int speaker_id = -1;   // -1 when unknown
  int language_id = -1;  // -1 when unknown
  Mat<float> mel;
  std::vector<float> f0_norm;
};

Container FeatureFileToContainer(const FeatureFile& f);
FeatureFile FeatureFileFromContainer(const Container& c);
void SaveFeatureFile(const std::string& path, const FeatureFile& f);
FeatureFile LoadFeatureFile(const std::string& path);

// Mel and normalized F0 of a WAV file.
FeatureFile ExtractFeatures(const WaveForm& wave, const FeatureConfig& cfg,
                            const std::string& utterance_id);

// ------------------------------------------------------------- corpora

// Layout: manifest.json, phonemes.json, languages.json, factors.gvck and
// features/<id>.gvck.
void SaveCorpus(const std::string& dir, const SyntheticCorpus& corpus);
SyntheticCorpus LoadCorpus(const std::string& dir);

std::vector<TrainingExample> ToTrainingExamples(const SyntheticCorpus& corpus,
                                                bool held_out);

// ------------------------------------------------------------ evaluation

// Bits per dim of the model over `examples`, counting the frames that pass
// through the flow body.
double ModelBitsPerDim(const GlowVcModel<float>& model,
                       std::span<const TrainingExample> examples);

struct EvalReport {
  std::string variant;
  int pairs = 0;
  double speaker_transfer_accuracy = 0.0;
  double content_preservation_score = 0.0;
  double bits_per_dim = 0.0;           // model, held-out split
  double baseline_bits_per_dim = 0.0;  // diagonal Gaussian fit on train split

  nlohmann::json ToJson() const;
};

// Converts `pairs` random held-out utterances to a different, randomly drawn
// speaker and scores the results against the corpus' planted factors.
EvalReport EvaluateModel(const GlowVcModel<float>& model,
                         const SyntheticCorpus& corpus, int pairs,
                         uint64_t seed);

}  // namespace glowvc

#endif  // GLOWVC_APP_H_
