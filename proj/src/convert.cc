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


#include "glowvc/convert.h"

#include <random>

#include "glowvc/error.h"

namespace glowvc {

template <typename T>
Mat<T> ConvertConditional(const GlowVcModel<T>& model, const Mat<T>& source,
                          const SpeakerEmbedding& source_speaker,
                          const SpeakerEmbedding& target_speaker) {
  Require(!model.is_explicit(), ErrorCode::kWrongVariant,
          "conditional conversion on an explicit model");
  Require(source.rows() > 0, ErrorCode::kEmptyInput, "empty source");
  const Segments seg = Segments::Single(source.rows());
  const Mat<T> src = model.FlowCondition(source_speaker);
  const Mat<T> tgt = model.FlowCondition(target_speaker);
  const Mat<T> z = model.flow.Forward(source, seg, &src).z;
  return model.flow.Inverse(z, seg, &tgt);
}

template <typename T>
Mat<T> ConvertExplicit(const GlowVcModel<T>& model, const Mat<T>& source,
                       const SpeakerEmbedding& target_speaker,
                       double speaker_temperature, uint64_t seed) {
  Require(model.is_explicit(), ErrorCode::kWrongVariant,
          "explicit conversion on a conditional model");
  Require(source.rows() > 0, ErrorCode::kEmptyInput, "empty source");
  Require(speaker_temperature >= 0.0, ErrorCode::kBadConfig,
          "negative speaker temperature");
  const Segments seg = Segments::Single(source.rows());
  Mat<T> z = model.flow.Forward(source, seg, nullptr).z;
  const LatentBlock sb = model.partition().speaker();
  Mat<T> mu = model.SpeakerPrior(target_speaker, source.rows()).mu;
  if (speaker_temperature > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, speaker_temperature);
    for (Index i = 0; i < mu.size(); ++i)
      mu.data()[i] += static_cast<T>(dist(rng));
  }
  z.middleCols(sb.offset, sb.width) = mu;
  return model.flow.Inverse(z, seg, nullptr);
}

template Mat<float> ConvertConditional<float>(const GlowVcModel<float>&,
                                              const Mat<float>&,
                                              const SpeakerEmbedding&,
                                              const SpeakerEmbedding&);
template Mat<double> ConvertConditional<double>(const GlowVcModel<double>&,
                                                const Mat<double>&,
                                                const SpeakerEmbedding&,
                                                const SpeakerEmbedding&);
template Mat<float> ConvertExplicit<float>(const GlowVcModel<float>&,
                                           const Mat<float>&,
                                           const SpeakerEmbedding&, double,
                                           uint64_t);
template Mat<double> ConvertExplicit<double>(const GlowVcModel<double>&,
                                             const Mat<double>&,
                                             const SpeakerEmbedding&, double,
                                             uint64_t);

}  // namespace glowvc
