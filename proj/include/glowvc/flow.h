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


// Invertible decoder: actnorm -> invertible channel mixing -> affine coupling
// blocks over squeezed frames, with exact log-determinant bookkeeping.

#ifndef GLOWVC_FLOW_H_
#define GLOWVC_FLOW_H_

#include <optional>
#include <string>
#include <vector>

#include "glowvc/nn.h"
#include "glowvc/tensor.h"

namespace glowvc::flow {

enum class Direction { kForward, kInverse };

// Frames after a layer plus the log-determinant contributed to each item.
template <typename T>
struct LayerOutput {
  Mat<T> frames;
  std::vector<double> logdet;
};

// Per-channel affine map y = exp(log_scale) * x + bias.
template <typename T>
class ActNorm {
 public:
  ActNorm() = default;
  explicit ActNorm(Index channels);

  // Sets the parameters so that `x` comes out with zero mean and unit
  // variance per channel.
  void InitializeFrom(const Mat<T>& x);
  bool initialized() const { return initialized_(0, 0) != T(0); }
  void set_initialized(bool v) { initialized_(0, 0) = v ? T(1) : T(0); }

  LayerOutput<T> Apply(const Mat<T>& x, const Segments& seg,
                       Direction dir) const;
  // Consumes the forward input; `dlogdet[i]` is dLoss/dlogdet of item i.
  Mat<T> Backward(const Mat<T>& dy, const Mat<T>& x, const Segments& seg,
                  const std::vector<double>& dlogdet);

  void Collect(const std::string& prefix, ParamList<T>* params,
               BufferList<T>* buffers);

  Param<T> log_scale;
  Param<T> bias;

 private:
  Mat<T> initialized_ = Mat<T>::Zero(1, 1);
};

// Invertible channel mixing y_t = W x_t with W = P L (U + diag(sign*exp(s))).
// L is unit lower-triangular, U strictly upper; only those entries of the
// stored matrices are used.
template <typename T>
class InvLinear {
 public:
  InvLinear() = default;
  // Random rotation (LU-factored) unless `identity`.
  InvLinear(Index channels, bool identity, nn::Rng* rng);
  // Builds the factorization of an arbitrary invertible matrix.
  static InvLinear FromMatrix(const Eigen::MatrixXd& w);

  Mat<T> Weight() const;
  Mat<T> InverseWeight() const;
  double LogAbsDet() const;
  Index channels() const { return log_diag.value.cols(); }

  LayerOutput<T> Apply(const Mat<T>& x, const Segments& seg,
                       Direction dir) const;
  Mat<T> Backward(const Mat<T>& dy, const Mat<T>& x, const Segments& seg,
                  const std::vector<double>& dlogdet);

  void Collect(const std::string& prefix, ParamList<T>* params,
               BufferList<T>* buffers);

  Param<T> lower;
  Param<T> upper;
  Param<T> log_diag;
  Mat<T> perm;  // row i of W is row perm[i] of L*V
  Mat<T> sign;

 private:
  Mat<T> Lower() const;
  Mat<T> UpperWithDiag() const;
  Mat<T> Permute(const Mat<T>& m) const;
  Mat<T> Unpermute(const Mat<T>& m) const;
};

struct CouplingConfig {
  Index channels = 160;
  Index hidden = 192;
  Index kernel = 3;
  Index cond_dim = 0;  // 0: unconditioned
};

// Affine coupling: the second half of the channels is scaled and shifted by
// a small convolutional network of the first half (and the condition).
// log-scale = sigma * tanh(raw).
template <typename T>
class Coupling {
 public:
  struct Cache {
    Mat<T> a;
    Mat<T> b;
    typename nn::Conv1d<T>::Cache conv_in;
    typename nn::Conv1d<T>::Cache conv_hidden;
    typename nn::Conv1d<T>::Cache conv_out;
    Mat<T> h1;
    Mat<T> h2;
    Mat<T> squashed;  // tanh(raw)
    Mat<T> log_scale;
    Mat<T> cond;
  };

  Coupling() = default;
  Coupling(const CouplingConfig& cfg, nn::Rng* rng);

  LayerOutput<T> Apply(const Mat<T>& x, const Segments& seg,
                       const Mat<T>* cond, Direction dir,
                       Cache* cache = nullptr) const;
  // Returns dLoss/dx; adds dLoss/dcond into `dcond` when conditioned.
  Mat<T> Backward(const Mat<T>& dy, const Segments& seg,
                  const std::vector<double>& dlogdet, const Cache& cache,
                  Mat<T>* dcond);

  void Collect(const std::string& prefix, ParamList<T>* params);

  const CouplingConfig& config() const { return cfg_; }
  bool conditional() const { return cfg_.cond_dim > 0; }

  nn::Conv1d<T> conv_in;
  nn::Conv1d<T> conv_hidden;
  nn::Conv1d<T> conv_out;  // zero-initialized
  nn::Linear<T> cond_proj;
  Param<T> sigma;

 private:
  // Shared by forward and inverse: log-scale and shift from the first half.
  void Network(const Mat<T>& a, const Segments& seg, const Mat<T>* cond,
               Mat<T>* log_scale, Mat<T>* shift, Cache* cache) const;
  void CheckCondition(const Mat<T>* cond, const Segments& seg) const;

  CouplingConfig cfg_;
};

// Channel grouping of adjacent frames. Each item's trailing T mod factor
// frames are held out and restored by Unsqueeze.
template <typename T>
struct Squeezed {
  Mat<T> body;
  Segments body_segments;
  Mat<T> held_out;
  Segments held_segments;
  Index factor = 1;
};

template <typename T>
Squeezed<T> Squeeze(const Mat<T>& x, const Segments& seg, Index factor);
template <typename T>
Mat<T> Unsqueeze(const Squeezed<T>& s);

// Frames of an item of length `length` that pass through the flow body.
inline Index RetainedLength(Index length, Index factor) {
  return factor * (length / factor);
}

struct FlowConfig {
  Index channels = 80;  // before squeezing
  Index squeeze = 2;    // 1 disables squeezing
  Index blocks = 4;
  Index hidden = 192;
  Index kernel = 3;
  Index cond_dim = 0;
  bool identity_init = false;
};

template <typename T>
struct FlowOutput {
  Mat<T> z;
  std::vector<double> logdet;  // per item, sum over all layers
};

template <typename T>
class FlowStack {
 public:
  struct Block {
    ActNorm<T> actnorm;
    InvLinear<T> mixing;
    Coupling<T> coupling;
  };

  struct Cache {
    Segments segments;
    Segments body_segments;
    std::vector<Mat<T>> actnorm_in;
    std::vector<Mat<T>> mixing_in;
    std::vector<typename Coupling<T>::Cache> coupling;
  };

  struct Gradients {
    Mat<T> dx;
    Mat<T> dcond;  // empty when unconditioned
  };

  FlowStack() = default;
  FlowStack(const FlowConfig& cfg, nn::Rng* rng);

  // x -> z. `cond` holds one row per item; required iff conditional.
  FlowOutput<T> Forward(const Mat<T>& x, const Segments& seg,
                        const Mat<T>* cond, Cache* cache = nullptr) const;
  // z -> x.
  Mat<T> Inverse(const Mat<T>& z, const Segments& seg,
                 const Mat<T>* cond) const;
  // Data-dependent actnorm initialization from a batch.
  void InitializeActNorm(const Mat<T>& x, const Segments& seg,
                         const Mat<T>* cond);
  bool initialized() const;

  // `dz` is dLoss/dz (rows aligned with x); `dlogdet[i]` is dLoss/dlogdet_i.
  Gradients Backward(const Mat<T>& dz, const std::vector<double>& dlogdet,
                     const Cache& cache);

  void Collect(const std::string& prefix, ParamList<T>* params,
               BufferList<T>* buffers);

  const FlowConfig& config() const { return cfg_; }
  bool conditional() const { return cfg_.cond_dim > 0; }
  std::vector<Block>& blocks() { return blocks_; }
  const std::vector<Block>& blocks() const { return blocks_; }

 private:
  FlowConfig cfg_;
  std::vector<Block> blocks_;
};

}  // namespace glowvc::flow

#endif  // GLOWVC_FLOW_H_
