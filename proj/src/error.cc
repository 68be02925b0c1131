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


#include "glowvc/error.h"

namespace glowvc {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedRiff: return "MalformedRiff";
    case ErrorCode::kUnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::kTooShort: return "TooShort";
    case ErrorCode::kNotInitialized: return "NotInitialized";
    case ErrorCode::kConditionMissing: return "ConditionMissing";
    case ErrorCode::kConditionUnexpected: return "ConditionUnexpected";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kNonPositiveDuration: return "NonPositiveDuration";
    case ErrorCode::kVocabularyOverflow: return "VocabularyOverflow";
    case ErrorCode::kWrongVariant: return "WrongVariant";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kBadLayout: return "BadLayout";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kBadConfig: return "BadConfig";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kVersionUnsupported: return "VersionUnsupported";
    case ErrorCode::kCorruptIndex: return "CorruptIndex";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace glowvc
