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


// The two model variants. Conditional: speaker-conditioned flow with a
// (content, pitch) latent. Explicit: unconditioned flow with a
// (content, speaker, pitch) latent whose speaker block has a prior mean
// projected from the speaker embedding.

#ifndef GLOWVC_MODEL_H_
#define GLOWVC_MODEL_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "glowvc/features.h"
#include "glowvc/flow.h"
#include "glowvc/priors.h"
#include "glowvc/tensor.h"

namespace glowvc {

enum class Variant { kConditional, kExplicit };

std::string_view VariantName(Variant v);
Variant ParseVariant(std::string_view name);

struct LatentBlock {
  Index offset = 0;
  Index width = 0;
};

// Contiguous channel slices in the order content, [speaker,] pitch.
class LatentPartition {
 public:
  LatentPartition() = default;
  // Throws kBadLayout unless the widths are positive, sum to `channels` and
  // their count matches the variant.
  static LatentPartition Make(Variant variant, std::vector<Index> widths,
                              Index channels = kMelBands);
  static LatentPartition Default(Variant variant);

  Variant variant() const { return variant_; }
  const std::vector<Index>& widths() const { return widths_; }
  Index channels() const { return channels_; }

  LatentBlock content() const { return Block(0); }
  LatentBlock speaker() const;
  LatentBlock pitch() const { return Block(widths_.size() - 1); }

 private:
  LatentBlock Block(size_t i) const;

  Variant variant_ = Variant::kConditional;
  std::vector<Index> widths_;
  Index channels_ = kMelBands;
};

template <typename T>
std::vector<Mat<T>> PartitionLatent(const Mat<T>& z,
                                    const LatentPartition& partition);
template <typename T>
Mat<T> ConcatBlocks(const std::vector<Mat<T>>& blocks);

struct ModelConfig {
  Variant variant = Variant::kExplicit;
  Index n_mels = kMelBands;
  std::vector<Index> partition = {40, 39, 1};
  Index speaker_dim = kSpeakerEmbeddingDim;
  Index n_speakers = 3;
  Index phoneme_vocab = 32;
  Index n_languages = 2;
  Index phoneme_dim = 64;
  Index language_dim = 8;
  Index conv_layers = 4;
  Index conv_channels = 128;
  Index conv_kernel = 5;
  double dropout = 0.2;
  Index flow_blocks = 4;
  Index hidden_channels = 384;
  Index coupling_kernel = 3;
  Index squeeze = 2;
  bool identity_init = false;
  uint64_t seed = 0;

  // Desk scale: 128 encoder channels, 4 flow blocks, 192 (conditional) or
  // 384 (explicit) coupling channels.
  static ModelConfig Desk(Variant v);
  // 512 encoder channels; otherwise as Desk.
  static ModelConfig Full(Variant v);
  // A few hundred parameters over 4 channels, for gradient checks.
  static ModelConfig Tiny(Variant v);

  // Throws kBadConfig / kBadLayout.
  void Validate() const;
};

struct ConditioningBundle {
  ContentInput content;
  NormalizedPitch pitch;
  SpeakerEmbedding speaker;

  // pitch length == sum of durations == frames.
  void Validate(Index frames) const;
};

template <typename T>
class GlowVcModel {
 public:
  GlowVcModel() = default;
  explicit GlowVcModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  Variant variant() const { return cfg_.variant; }
  const LatentPartition& partition() const { return partition_; }
  bool is_explicit() const { return cfg_.variant == Variant::kExplicit; }

  // Row `id` of the learned speaker table.
  SpeakerEmbedding Speaker(int id) const;
  Index num_speakers() const { return speaker_table.vocab(); }

  // Concatenated prior means for every frame of the bundle (evaluation mode).
  Mat<T> PriorMean(const ConditioningBundle& bundle) const;
  // Flow condition row for a speaker, or an empty matrix (explicit).
  Mat<T> FlowCondition(const SpeakerEmbedding& s) const;
  // Broadcast mu^(s) for `frames` frames. Throws kWrongVariant.
  PriorStats<T> SpeakerPrior(const SpeakerEmbedding& s, Index frames) const;

  ParamList<T> Params();
  BufferList<T> Buffers();

  ContentEncoder<T> content_encoder;
  nn::Embedding<T> speaker_table;
  SpeakerEncoder<T> speaker_encoder;  // explicit only
  flow::FlowStack<T> flow;

 private:
  ModelConfig cfg_;
  LatentPartition partition_;
};

template <typename T>
Mat<T> ToMat(const Mat<float>& m) {
  return m.template cast<T>();
}

// Sum over all rows of z of the factorized Gaussian log-density.
template <typename T>
double LogPrior(const Mat<T>& z, const ConditioningBundle& bundle,
                const GlowVcModel<T>& model);

// -(log prior + log|det|) over the frames that pass through the flow body.
template <typename T>
double Nll(const Mat<T>& x, const ConditioningBundle& bundle,
           const GlowVcModel<T>& model);

// Frames counted by Nll for an utterance of `frames` frames.
template <typename T>
Index ValidFrames(const GlowVcModel<T>& model, Index frames) {
  return flow::RetainedLength(frames, model.flow.config().squeeze);
}

// Samples z ~ N(mu, temperature^2) and decodes it.
template <typename T>
Mat<T> TtsInfer(const ConditioningBundle& bundle, const GlowVcModel<T>& model,
                double temperature, uint64_t seed = 0);

// One training utterance: features plus conditioning by speaker id.
struct TrainingExample {
  std::string id;
  Mat<float> mel;
  ContentInput content;
  std::vector<float> pitch;
  int speaker_id = 0;
};

struct BatchLoss {
  double mean_nll = 0.0;  // mean over items of per-utterance nll
  double total_nll = 0.0;
  Index valid_frames = 0;
  std::vector<double> item_nll;
};

// Loss of a batch and, when `accumulate_grads`, the gradient of mean_nll
// added into every parameter's grad.
template <typename T>
BatchLoss BatchNll(GlowVcModel<T>& model,
                   std::span<const TrainingExample* const> batch,
                   const PassOptions& opt, bool accumulate_grads);

// Data-dependent actnorm initialization from a batch.
template <typename T>
void InitializeActNorm(GlowVcModel<T>& model,
                       std::span<const TrainingExample* const> batch);

}  // namespace glowvc

#endif  // GLOWVC_MODEL_H_
