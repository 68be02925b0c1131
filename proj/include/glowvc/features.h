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


// Audio front end: 16 kHz PCM in, 80-band log-mel spectrograms and
// interpolated, log-domain, per-utterance standardized F0 tracks out.

#ifndef GLOWVC_FEATURES_H_
#define GLOWVC_FEATURES_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "glowvc/tensor.h"

namespace glowvc {

inline constexpr int kSampleRate = 16000;
inline constexpr Index kMelBands = 80;

struct WaveForm {
  std::vector<float> samples;
  int sample_rate = kSampleRate;
};

// T x 80 natural-log mel energies; 50 ms frames every 12.5 ms.
struct MelSpectrogram {
  Mat<float> frames;

  Index num_frames() const { return frames.rows(); }
};

// f0_hz[i] == 0 exactly when voiced[i] is false.
struct PitchTrack {
  std::vector<float> f0_hz;
  std::vector<bool> voiced;
};

struct NormalizedPitch {
  std::vector<float> values;
};

struct StftConfig {
  Index window = 800;
  Index hop = 200;
  Index fft_size = 1024;
  Index n_mels = kMelBands;
  double f_min = 0.0;
  double f_max = 8000.0;
  double amplitude_floor = 1e-10;
};

struct F0Config {
  Index window = 800;
  Index hop = 200;
  double f_min = 40.0;
  double f_max = 600.0;
  double voicing_threshold = 0.5;
  double rms_floor = 1e-4;
};

// RIFF/WAVE, 16-bit PCM, mono, 16 kHz. Throws kMalformedRiff or
// kUnsupportedFormat.
WaveForm ParseWav(std::span<const uint8_t> bytes);
WaveForm LoadWav(const std::string& path);
// Samples are clipped to [-1, 1] and quantized to 16 bits.
std::vector<uint8_t> EncodeWav(const WaveForm& wave);
void SaveWav(const std::string& path, const WaveForm& wave);

// Number of frames produced for `samples` inputs (no edge padding).
Index NumFrames(Index samples, Index window, Index hop);

double HzToMel(double hz);
double MelToHz(double mel);
// Center frequency of every mel band.
std::vector<double> MelCenterFrequencies(const StftConfig& cfg);

MelSpectrogram ComputeMelSpectrogram(const WaveForm& wave,
                                     const StftConfig& cfg = {});
PitchTrack EstimateF0(const WaveForm& wave, const F0Config& cfg = {});
NormalizedPitch NormalizeF0(const PitchTrack& track);

}  // namespace glowvc

#endif  // GLOWVC_FEATURES_H_
