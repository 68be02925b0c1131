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


#ifndef GLOWVC_TENSOR_H_
#define GLOWVC_TENSOR_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace glowvc {

using Index = Eigen::Index;

// Frame matrices are row-major: one row per frame, one column per channel.
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

// Packed variable-length batch layout. Item i occupies rows
// [offsets[i], offsets[i + 1]) of a frame matrix. Time-domain operators
// (convolutions, recurrences) never reach across item boundaries.
class Segments {
 public:
  Segments() : offsets_{0} {}

  static Segments Single(Index length) { return FromLengths({length}); }

  static Segments FromLengths(std::span<const Index> lengths) {
    Segments s;
    s.offsets_.reserve(lengths.size() + 1);
    for (Index len : lengths) s.offsets_.push_back(s.offsets_.back() + len);
    return s;
  }
  static Segments FromLengths(std::initializer_list<Index> lengths) {
    return FromLengths(std::span<const Index>(lengths.begin(), lengths.size()));
  }

  Index size() const { return static_cast<Index>(offsets_.size()) - 1; }
  Index begin(Index i) const { return offsets_[i]; }
  Index end(Index i) const { return offsets_[i + 1]; }
  Index length(Index i) const { return offsets_[i + 1] - offsets_[i]; }
  Index total() const { return offsets_.back(); }

  std::vector<Index> lengths() const {
    std::vector<Index> out(size());
    for (Index i = 0; i < size(); ++i) out[i] = length(i);
    return out;
  }

  // Item index of every row.
  std::vector<Index> owners() const {
    std::vector<Index> out(total());
    for (Index i = 0; i < size(); ++i)
      for (Index r = begin(i); r < end(i); ++r) out[r] = i;
    return out;
  }

  bool operator==(const Segments&) const = default;

 private:
  std::vector<Index> offsets_;
};

// A trainable tensor and its gradient accumulator.
template <typename T>
struct Param {
  Mat<T> value;
  Mat<T> grad;

  Param() = default;
  Param(Index rows, Index cols)
      : value(Mat<T>::Zero(rows, cols)), grad(Mat<T>::Zero(rows, cols)) {}

  void ZeroGrad() { grad.setZero(value.rows(), value.cols()); }
};

template <typename T>
struct NamedParam {
  std::string name;
  Param<T>* param;
};

// Non-trainable state that still belongs in a checkpoint (running statistics,
// fixed permutations, flags).
template <typename T>
struct NamedBuffer {
  std::string name;
  Mat<T>* value;
};

template <typename T>
using ParamList = std::vector<NamedParam<T>>;
template <typename T>
using BufferList = std::vector<NamedBuffer<T>>;

template <typename T>
void ZeroGrads(const ParamList<T>& params) {
  for (const auto& p : params) p.param->ZeroGrad();
}

template <typename T>
Index CountParams(const ParamList<T>& params) {
  Index n = 0;
  for (const auto& p : params) n += p.param->value.size();
  return n;
}

}  // namespace glowvc

#endif  // GLOWVC_TENSOR_H_
