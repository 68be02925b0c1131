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


// Small differentiable building blocks with hand-written adjoints. Every
// layer follows the same protocol: Forward() optionally fills a cache, and
// Backward() consumes it, accumulates parameter gradients and returns the
// gradient with respect to the layer input.

#ifndef GLOWVC_NN_H_
#define GLOWVC_NN_H_

#include <random>
#include <string>
#include <vector>

#include "glowvc/tensor.h"

namespace glowvc::nn {

using Rng = std::mt19937_64;

template <typename T>
void UniformInit(Mat<T>* m, double bound, Rng* rng);

// 1-D convolution over time with zero "same" padding inside each segment.
// Weight layout is (kernel * in) x out, tap-major, matching the im2col rows.
template <typename T>
class Conv1d {
 public:
  struct Cache {
    Mat<T> columns;
    Segments segments;
  };

  Conv1d() = default;
  Conv1d(Index in, Index out, Index kernel, Rng* rng);

  Mat<T> Forward(const Mat<T>& x, const Segments& seg, Cache* cache) const;
  Mat<T> Backward(const Mat<T>& dy, const Cache& cache);

  void Collect(const std::string& prefix, ParamList<T>* out);

  Index in() const { return in_; }
  Index out() const { return out_; }
  Index kernel() const { return kernel_; }

  Param<T> weight;
  Param<T> bias;

 private:
  Mat<T> Im2Col(const Mat<T>& x, const Segments& seg) const;

  Index in_ = 0;
  Index out_ = 0;
  Index kernel_ = 1;
};

// Row-wise affine map y = x W + b.
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(Index in, Index out, Rng* rng);

  Mat<T> Forward(const Mat<T>& x) const;
  // Needs the forward input.
  Mat<T> Backward(const Mat<T>& dy, const Mat<T>& x);

  void Collect(const std::string& prefix, ParamList<T>* out);

  Param<T> weight;
  Param<T> bias;
};

template <typename T>
class Embedding {
 public:
  Embedding() = default;
  Embedding(Index vocab, Index dim, Rng* rng);

  Mat<T> Forward(std::span<const int> ids) const;
  void Backward(const Mat<T>& dy, std::span<const int> ids);

  void Collect(const std::string& prefix, ParamList<T>* out);

  Index vocab() const { return table.value.rows(); }

  Param<T> table;
};

// Batch normalization over all rows of a packed batch.
template <typename T>
class BatchNorm {
 public:
  struct Cache {
    Mat<T> normalized;
    RowVec<T> inv_std;
    RowVec<T> batch_mean;
    RowVec<T> batch_var;
    Index rows = 0;
    bool training = true;
  };

  BatchNorm() = default;
  explicit BatchNorm(Index channels);

  // Training mode normalizes with batch statistics; evaluation mode with the
  // running estimates.
  Mat<T> Forward(const Mat<T>& x, bool training, Cache* cache) const;
  // Folds the batch statistics recorded in `cache` into the running ones.
  void UpdateRunningStats(const Cache& cache);
  Mat<T> Backward(const Mat<T>& dy, const Cache& cache);

  void Collect(const std::string& prefix, ParamList<T>* params,
               BufferList<T>* buffers);

  Param<T> gamma;
  Param<T> beta;
  Mat<T> running_mean;
  Mat<T> running_var;

  static constexpr double kMomentum = 0.1;
  static constexpr double kEps = 1e-5;
};

// Single-direction LSTM run independently over every segment.
template <typename T>
class Lstm {
 public:
  struct Cache {
    Mat<T> input;
    Mat<T> gates;  // post-activation i, f, g, o per row
    Mat<T> cell;
    Mat<T> hidden;
    Segments segments;
  };

  Lstm() = default;
  Lstm(Index in, Index hidden, bool reverse, Rng* rng);

  Mat<T> Forward(const Mat<T>& x, const Segments& seg, Cache* cache) const;
  Mat<T> Backward(const Mat<T>& dh, const Cache& cache);

  void Collect(const std::string& prefix, ParamList<T>* out);

  Index hidden_size() const { return hidden_; }

  Param<T> w_input;      // in x 4H
  Param<T> w_recurrent;  // H x 4H
  Param<T> bias;         // 1 x 4H

 private:
  Index in_ = 0;
  Index hidden_ = 0;
  bool reverse_ = false;
};

enum class BiMerge { kConcat, kSum };

template <typename T>
class BiLstm {
 public:
  struct Cache {
    typename Lstm<T>::Cache forward;
    typename Lstm<T>::Cache backward;
  };

  BiLstm() = default;
  BiLstm(Index in, Index hidden, BiMerge merge, Rng* rng);

  Mat<T> Forward(const Mat<T>& x, const Segments& seg, Cache* cache) const;
  Mat<T> Backward(const Mat<T>& dy, const Cache& cache);

  void Collect(const std::string& prefix, ParamList<T>* out);

  Index output_size() const {
    return merge_ == BiMerge::kConcat ? 2 * fwd.hidden_size()
                                      : fwd.hidden_size();
  }

  Lstm<T> fwd;
  Lstm<T> bwd;

 private:
  BiMerge merge_ = BiMerge::kConcat;
};

template <typename T>
inline T Sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace glowvc::nn

#endif  // GLOWVC_NN_H_
