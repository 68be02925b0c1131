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

#ifndef GLOWVC_ERROR_H_
#define GLOWVC_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace glowvc {

enum class ErrorCode {
  kMalformedRiff,
  kUnsupportedFormat,
  kTooShort,
  kNotInitialized,
  kConditionMissing,
  kConditionUnexpected,
  kEmptyInput,
  kNonPositiveDuration,
  kVocabularyOverflow,
  kWrongVariant,
  kShapeMismatch,
  kBadLayout,
  kNonFiniteLoss,
  kBadConfig,
  kInsufficientData,
  kLengthMismatch,
  kBadMagic,
  kVersionUnsupported,
  kCorruptIndex,
  kIo,
};

std::string_view ErrorCodeName(ErrorCode code);

// Every failure surfaced by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void Require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) Fail(code, what);
}

}  // namespace glowvc

#endif  // GLOWVC_ERROR_H_
