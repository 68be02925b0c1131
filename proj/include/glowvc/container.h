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


// The "GVCK" tensor container shared by checkpoints and feature files:
//   magic "GVCK" | u32 version | u64 header length | JSON header | payload
// The header holds free-form metadata plus a tensor index mapping each name
// to {dtype, shape, offset, length}; the payload is little-endian float32.

#ifndef GLOWVC_CONTAINER_H_
#define GLOWVC_CONTAINER_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "glowvc/tensor.h"

namespace glowvc {

inline constexpr uint32_t kContainerVersion = 1;

struct Tensor {
  std::vector<int64_t> shape;
  std::vector<float> data;

  static Tensor FromMat(const Mat<float>& m);
  static Tensor FromVector(std::span<const float> v);
  // Rank-2 tensors map directly; rank-1 tensors become a single column.
  Mat<float> ToMat() const;
  int64_t elements() const;
};

struct Container {
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, Tensor> tensors;

  const Tensor& Get(const std::string& name) const;  // throws kCorruptIndex
};

// Throws kBadMagic, kVersionUnsupported, kCorruptIndex, kShapeMismatch.
Container DecodeContainer(std::span<const uint8_t> bytes);
std::vector<uint8_t> EncodeContainer(const Container& c);

Container ReadContainer(const std::string& path);
void WriteContainer(const std::string& path, const Container& c);

std::vector<uint8_t> ReadFileBytes(const std::string& path);
void WriteFileBytes(const std::string& path, std::span<const uint8_t> bytes);

}  // namespace glowvc

#endif  // GLOWVC_CONTAINER_H_
