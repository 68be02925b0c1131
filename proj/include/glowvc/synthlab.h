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


// Synthetic factorized corpus and the disentanglement / quality metrics
// computed against its planted generator factors.

#ifndef GLOWVC_SYNTHLAB_H_
#define GLOWVC_SYNTHLAB_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "glowvc/features.h"
#include "glowvc/model.h"
#include "glowvc/priors.h"
#include "glowvc/tensor.h"

namespace glowvc {

struct SynthConfig {
  int n_speakers = 3;
  int n_languages = 2;
  int utterances_per_speaker = 100;
  int phoneme_vocab_size = 32;
  int min_phonemes = 4;
  int max_phonemes = 10;
  int min_duration = 2;
  int max_duration = 5;
  Index n_mels = kMelBands;
  Index content_dim = 40;
  Index speaker_dim = 39;  // pitch takes the remaining channel
  double noise_std = 0.05;
  double content_noise_std = 0.05;
  double language_scale = 0.5;
  bool identity_mixing = false;
  double min_speaker_distance = 1.0;
  double held_out_fraction = 0.2;
  uint64_t seed = 42;

  void Validate() const;
};

// Latent frame u = [content; speaker; pitch] maps to x = u M + bias + noise.
struct GeneratorFactors {
  Mat<double> speaker_vectors;   // n_speakers x speaker_dim
  Mat<double> phoneme_vectors;   // vocab x content_dim
  Mat<double> language_vectors;  // n_languages x content_dim
  Mat<double> mixing;            // n_mels x n_mels, row-vector convention
  Mat<double> bias;              // 1 x n_mels

  Index content_dim() const { return phoneme_vectors.cols(); }
  Index speaker_dim() const { return speaker_vectors.cols(); }

  // Planted latent frames of `features` (inverse mixing).
  Mat<double> Unmix(const Mat<float>& features) const;
};

struct SynthUtterance {
  std::string id;
  int speaker_id = 0;
  bool held_out = false;
  ContentInput content;
  PitchTrack pitch_track;
  NormalizedPitch pitch;
  Mat<float> mel;
};

struct SyntheticCorpus {
  SynthConfig config;
  std::vector<SynthUtterance> utterances;
  GeneratorFactors factors;
  std::vector<std::string> phoneme_symbols;   // index == id
  std::vector<std::string> language_symbols;  // index == id
};

// Throws kBadConfig.
SyntheticCorpus GenerateCorpus(const SynthConfig& cfg);

// Draws the per-speaker, per-phoneme and per-language vectors and the mixing
// map, exactly as GenerateCorpus does for the same config.
GeneratorFactors DrawFactors(const SynthConfig& cfg);

// Renders one utterance; the pitch contour and noise come from `seed` alone.
SynthUtterance SynthesizeUtterance(const GeneratorFactors& factors,
                                   const SynthConfig& cfg, int speaker_id,
                                   const ContentInput& content, uint64_t seed);

// A feature matrix labelled with the speaker it should sound like.
struct LabelledFeatures {
  const Mat<float>* features = nullptr;
  int target_speaker = 0;
};

// Per-speaker centroids of time-averaged feature vectors.
struct SpeakerCentroids {
  Mat<double> centroids;  // n_speakers x n_mels

  static SpeakerCentroids Fit(std::span<const LabelledFeatures> reference);
  int Classify(const Mat<float>& features) const;
};

// Fraction of `converted` items whose nearest centroid is the intended
// target. Throws kInsufficientData.
double SpeakerTransferAccuracy(std::span<const LabelledFeatures> converted,
                               const SpeakerCentroids& centroids);

// Mean per-utterance Pearson correlation of planted content trajectories.
// Throws kLengthMismatch.
double ContentPreservationScore(std::span<const Mat<float>* const> sources,
                                std::span<const Mat<float>* const> converted,
                                const GeneratorFactors& factors);

// Standard-normal features with random phonemes, languages, speakers and
// pitch, shaped for `cfg`; one example per entry of `lengths`.
std::vector<TrainingExample> RandomTrainingExamples(
    const ModelConfig& cfg, std::span<const Index> lengths, uint64_t seed);

double BitsPerDim(double nll, Index frames, Index dims = kMelBands);

// Per-channel Gaussian fitted in closed form.
struct DiagonalGaussian {
  RowVec<double> mean;
  RowVec<double> var;

  static DiagonalGaussian Fit(std::span<const Mat<float>* const> data);
  double Nll(const Mat<float>& x) const;
  double BitsPerDim(std::span<const Mat<float>* const> data) const;
};

}  // namespace glowvc

#endif  // GLOWVC_SYNTHLAB_H_
