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


// Text-free voice conversion. Only the decoder and the speaker prior are
// used: neither entry point takes content or pitch conditioning.

#ifndef GLOWVC_CONVERT_H_
#define GLOWVC_CONVERT_H_

#include <cstdint>

#include "glowvc/model.h"

namespace glowvc {

// x_out = f(s_tgt)( f(s_src)^-1 (x_src) ). Throws kWrongVariant.
template <typename T>
Mat<T> ConvertConditional(const GlowVcModel<T>& model, const Mat<T>& source,
                          const SpeakerEmbedding& source_speaker,
                          const SpeakerEmbedding& target_speaker);

// Encodes x_src, overwrites the speaker block with the target's broadcast
// prior mean (plus optional noise of std `speaker_temperature`) and decodes.
// Throws kWrongVariant.
template <typename T>
Mat<T> ConvertExplicit(const GlowVcModel<T>& model, const Mat<T>& source,
                       const SpeakerEmbedding& target_speaker,
                       double speaker_temperature = 0.0, uint64_t seed = 0);

}  // namespace glowvc

#endif  // GLOWVC_CONVERT_H_
