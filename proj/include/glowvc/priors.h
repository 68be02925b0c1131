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


// Prior statistics for the factorized latent: content means from the
// phoneme-level encoder, pitch means taken directly from the normalized F0
// track, and speaker means from a linear projection of the speaker
// embedding. All priors have unit standard deviation.

#ifndef GLOWVC_PRIORS_H_
#define GLOWVC_PRIORS_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "glowvc/nn.h"
#include "glowvc/tensor.h"

namespace glowvc {

// Linguistic conditioning of one utterance. durations[i] is the number of
// frames phoneme i spans.
struct ContentInput {
  std::vector<int> phoneme_ids;
  int language_id = 0;
  std::vector<int> durations;

  Index TotalFrames() const;
  // Throws kEmptyInput, kNonPositiveDuration, kShapeMismatch or
  // kVocabularyOverflow.
  void Validate(Index phoneme_vocab, Index n_languages) const;
};

struct SpeakerEmbedding {
  std::vector<float> values;
};

inline constexpr Index kSpeakerEmbeddingDim = 192;

template <typename T>
struct PriorStats {
  Mat<T> mu;
  double sigma = 1.0;
};

// Repeats row i of `per_phoneme` durations[i] times.
template <typename T>
Mat<T> UpsampleByDuration(const Mat<T>& per_phoneme,
                          std::span<const int> durations);

// Sum over all cells of log N(z; mu, 1), accumulated in double.
template <typename T>
double GaussianLoglik(const Mat<T>& z, const Mat<T>& mu);
template <typename T>
double GaussianLoglik(const Mat<T>& z, const PriorStats<T>& stats) {
  return GaussianLoglik(z, stats.mu);
}

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;

// mu^(p) = p as a T x 1 column.
template <typename T>
PriorStats<T> PitchPrior(std::span<const float> normalized_pitch);

struct ContentEncoderConfig {
  Index phoneme_vocab = 32;
  Index n_languages = 1;
  Index phoneme_dim = 64;
  Index language_dim = 8;
  Index conv_layers = 4;
  Index conv_channels = 128;
  Index conv_kernel = 5;
  double dropout = 0.2;
  Index width = 40;  // content block width; also the recurrent hidden size
};

// Forward-pass switches. Evaluation mode uses running batch-norm statistics
// and no dropout, so it is deterministic.
struct PassOptions {
  bool training = false;
  bool update_running_stats = false;
  uint64_t dropout_seed = 0;
};

// Embeddings -> [conv, batch norm, ReLU, dropout] x N -> BiLSTM -> duration
// upsampling -> BiLSTM. The second recurrent layer sums its two directions so
// its output width equals the content block width.
template <typename T>
class ContentEncoder {
 public:
  struct Cache {
    std::vector<int> phonemes;
    std::vector<int> languages;  // one per phoneme row
    Segments phoneme_segments;
    Segments frame_segments;
    std::vector<Index> frame_source;  // phoneme row for each frame row
    std::vector<typename nn::Conv1d<T>::Cache> conv;
    std::vector<typename nn::BatchNorm<T>::Cache> norm;
    std::vector<Mat<T>> normalized_out;  // batch-norm outputs (pre-ReLU)
    std::vector<Mat<T>> dropout_mask;
    typename nn::BiLstm<T>::Cache lstm1;
    typename nn::BiLstm<T>::Cache lstm2;
  };

  ContentEncoder() = default;
  ContentEncoder(const ContentEncoderConfig& cfg, nn::Rng* rng);

  // Returns mu^(c) packed over all items: sum(T_i) x width.
  Mat<T> Forward(std::span<const ContentInput* const> batch,
                 const PassOptions& opt, Cache* cache);
  Mat<T> Evaluate(const ContentInput& input) const;
  void Backward(const Mat<T>& dmu, const Cache& cache);

  void Collect(const std::string& prefix, ParamList<T>* params,
               BufferList<T>* buffers);

  const ContentEncoderConfig& config() const { return cfg_; }

  nn::Embedding<T> phoneme_embedding;
  nn::Embedding<T> language_embedding;
  std::vector<nn::Conv1d<T>> convs;
  std::vector<nn::BatchNorm<T>> norms;
  nn::BiLstm<T> lstm1;
  nn::BiLstm<T> lstm2;

 private:
  Mat<T> Run(std::span<const ContentInput* const> batch, const PassOptions& opt,
             Cache* cache) const;

  ContentEncoderConfig cfg_;
};

// mu^(s) = s A + b, broadcast over frames.
template <typename T>
class SpeakerEncoder {
 public:
  SpeakerEncoder() = default;
  SpeakerEncoder(Index embedding_dim, Index width, nn::Rng* rng);

  // One row of means per embedding row.
  Mat<T> Forward(const Mat<T>& embeddings) const;
  Mat<T> Backward(const Mat<T>& dmu, const Mat<T>& embeddings);
  PriorStats<T> Prior(const SpeakerEmbedding& s, Index frames) const;

  void Collect(const std::string& prefix, ParamList<T>* params);

  Index width() const { return proj.weight.value.cols(); }

  nn::Linear<T> proj;
};

}  // namespace glowvc

#endif  // GLOWVC_PRIORS_H_
