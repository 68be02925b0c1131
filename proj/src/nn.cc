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


#include "glowvc/nn.h"

#include <cmath>

#include "glowvc/error.h"

namespace glowvc::nn {

template <typename T>
void UniformInit(Mat<T>* m, double bound, Rng* rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index i = 0; i < m->size(); ++i) m->data()[i] = static_cast<T>(dist(*rng));
}

// ---------------------------------------------------------------- Conv1d

template <typename T>
Conv1d<T>::Conv1d(Index in, Index out, Index kernel, Rng* rng)
    : weight(kernel * in, out), bias(1, out), in_(in), out_(out),
      kernel_(kernel) {
  Require(kernel % 2 == 1, ErrorCode::kBadConfig, "conv kernel must be odd");
  const double bound = 1.0 / std::sqrt(static_cast<double>(kernel * in));
  UniformInit(&weight.value, bound, rng);
  UniformInit(&bias.value, bound, rng);
}

template <typename T>
Mat<T> Conv1d<T>::Im2Col(const Mat<T>& x, const Segments& seg) const {
  if (kernel_ == 1) return x;
  Mat<T> cols = Mat<T>::Zero(x.rows(), kernel_ * in_);
  const Index half = kernel_ / 2;
  for (Index s = 0; s < seg.size(); ++s) {
    const Index b = seg.begin(s), e = seg.end(s);
    for (Index r = b; r < e; ++r) {
      for (Index j = 0; j < kernel_; ++j) {
        const Index src = r + j - half;
        if (src < b || src >= e) continue;
        cols.block(r, j * in_, 1, in_) = x.row(src);
      }
    }
  }
  return cols;
}

template <typename T>
Mat<T> Conv1d<T>::Forward(const Mat<T>& x, const Segments& seg,
                          Cache* cache) const {
  Require(x.cols() == in_, ErrorCode::kShapeMismatch, "conv input width");
  Mat<T> cols = Im2Col(x, seg);
  Mat<T> y = cols * weight.value;
  y.rowwise() += bias.value.row(0);
  if (cache != nullptr) {
    cache->columns = std::move(cols);
    cache->segments = seg;
  }
  return y;
}

template <typename T>
Mat<T> Conv1d<T>::Backward(const Mat<T>& dy, const Cache& cache) {
  weight.grad.noalias() += cache.columns.transpose() * dy;
  bias.grad.row(0) += dy.colwise().sum();
  Mat<T> dcols = dy * weight.value.transpose();
  if (kernel_ == 1) return dcols;
  const Segments& seg = cache.segments;
  Mat<T> dx = Mat<T>::Zero(dy.rows(), in_);
  const Index half = kernel_ / 2;
  for (Index s = 0; s < seg.size(); ++s) {
    const Index b = seg.begin(s), e = seg.end(s);
    for (Index r = b; r < e; ++r) {
      for (Index j = 0; j < kernel_; ++j) {
        const Index src = r + j - half;
        if (src < b || src >= e) continue;
        dx.row(src) += dcols.block(r, j * in_, 1, in_);
      }
    }
  }
  return dx;
}

template <typename T>
void Conv1d<T>::Collect(const std::string& prefix, ParamList<T>* out) {
  out->push_back({prefix + ".weight", &weight});
  out->push_back({prefix + ".bias", &bias});
}

// ---------------------------------------------------------------- Linear

template <typename T>
Linear<T>::Linear(Index in, Index out, Rng* rng)
    : weight(in, out), bias(1, out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  UniformInit(&weight.value, bound, rng);
  UniformInit(&bias.value, bound, rng);
}

template <typename T>
Mat<T> Linear<T>::Forward(const Mat<T>& x) const {
  Require(x.cols() == weight.value.rows(), ErrorCode::kShapeMismatch,
          "linear input width");
  Mat<T> y = x * weight.value;
  y.rowwise() += bias.value.row(0);
  return y;
}

template <typename T>
Mat<T> Linear<T>::Backward(const Mat<T>& dy, const Mat<T>& x) {
  weight.grad.noalias() += x.transpose() * dy;
  bias.grad.row(0) += dy.colwise().sum();
  return dy * weight.value.transpose();
}

template <typename T>
void Linear<T>::Collect(const std::string& prefix, ParamList<T>* out) {
  out->push_back({prefix + ".weight", &weight});
  out->push_back({prefix + ".bias", &bias});
}

// ------------------------------------------------------------- Embedding

template <typename T>
Embedding<T>::Embedding(Index vocab, Index dim, Rng* rng) : table(vocab, dim) {
  std::normal_distribution<double> dist(0.0, 1.0);
  for (Index i = 0; i < table.value.size(); ++i)
    table.value.data()[i] = static_cast<T>(dist(*rng));
}

template <typename T>
Mat<T> Embedding<T>::Forward(std::span<const int> ids) const {
  Mat<T> out(static_cast<Index>(ids.size()), table.value.cols());
  for (size_t i = 0; i < ids.size(); ++i) {
    Require(ids[i] >= 0 && ids[i] < vocab(), ErrorCode::kVocabularyOverflow,
            "id " + std::to_string(ids[i]) + " outside vocabulary of " +
                std::to_string(vocab()));
    out.row(static_cast<Index>(i)) = table.value.row(ids[i]);
  }
  return out;
}

template <typename T>
void Embedding<T>::Backward(const Mat<T>& dy, std::span<const int> ids) {
  for (size_t i = 0; i < ids.size(); ++i)
    table.grad.row(ids[i]) += dy.row(static_cast<Index>(i));
}

template <typename T>
void Embedding<T>::Collect(const std::string& prefix, ParamList<T>* out) {
  out->push_back({prefix + ".table", &table});
}

// ------------------------------------------------------------- BatchNorm

template <typename T>
BatchNorm<T>::BatchNorm(Index channels)
    : gamma(1, channels), beta(1, channels),
      running_mean(Mat<T>::Zero(1, channels)),
      running_var(Mat<T>::Ones(1, channels)) {
  gamma.value.setOnes();
}

template <typename T>
Mat<T> BatchNorm<T>::Forward(const Mat<T>& x, bool training,
                             Cache* cache) const {
  RowVec<T> mean, var;
  if (training) {
    Require(x.rows() >= 1, ErrorCode::kEmptyInput, "batch norm on empty batch");
    mean = x.colwise().mean();
    var = (x.rowwise() - mean).array().square().colwise().mean();
  } else {
    mean = running_mean.row(0);
    var = running_var.row(0);
  }
  RowVec<T> inv_std = (var.array() + static_cast<T>(kEps)).rsqrt();
  Mat<T> normalized =
      (x.rowwise() - mean).array().rowwise() * inv_std.array();
  Mat<T> y = normalized.array().rowwise() * gamma.value.row(0).array();
  y.rowwise() += beta.value.row(0);
  if (cache != nullptr) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
    cache->batch_mean = std::move(mean);
    cache->batch_var = std::move(var);
    cache->rows = x.rows();
    cache->training = training;
  }
  return y;
}

template <typename T>
void BatchNorm<T>::UpdateRunningStats(const Cache& cache) {
  const T m = static_cast<T>(kMomentum);
  const Index n = cache.rows;
  const T unbias = n > 1 ? T(n) / T(n - 1) : T(1);
  running_mean.row(0) = (T(1) - m) * running_mean.row(0) + m * cache.batch_mean;
  running_var.row(0) =
      (T(1) - m) * running_var.row(0) + m * unbias * cache.batch_var;
}

template <typename T>
Mat<T> BatchNorm<T>::Backward(const Mat<T>& dy, const Cache& cache) {
  const Mat<T>& xhat = cache.normalized;
  const T n = static_cast<T>(dy.rows());
  gamma.grad.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  beta.grad.row(0) += dy.colwise().sum();
  Mat<T> dxhat = dy.array().rowwise() * gamma.value.row(0).array();
  if (!cache.training) return dxhat.array().rowwise() * cache.inv_std.array();
  RowVec<T> sum_dxhat = dxhat.colwise().sum();
  RowVec<T> sum_dxhat_xhat = (dxhat.array() * xhat.array()).colwise().sum();
  Mat<T> dx = (n * dxhat.array()).matrix();
  dx.rowwise() -= sum_dxhat;
  dx.array() -= xhat.array().rowwise() * sum_dxhat_xhat.array();
  dx.array().rowwise() *= (cache.inv_std.array() / n);
  return dx;
}

template <typename T>
void BatchNorm<T>::Collect(const std::string& prefix, ParamList<T>* params,
                           BufferList<T>* buffers) {
  params->push_back({prefix + ".gamma", &gamma});
  params->push_back({prefix + ".beta", &beta});
  buffers->push_back({prefix + ".running_mean", &running_mean});
  buffers->push_back({prefix + ".running_var", &running_var});
}

// ------------------------------------------------------------------ Lstm

template <typename T>
Lstm<T>::Lstm(Index in, Index hidden, bool reverse, Rng* rng)
    : w_input(in, 4 * hidden), w_recurrent(hidden, 4 * hidden),
      bias(1, 4 * hidden), in_(in), hidden_(hidden), reverse_(reverse) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  UniformInit(&w_input.value, bound, rng);
  UniformInit(&w_recurrent.value, bound, rng);
  UniformInit(&bias.value, bound, rng);
}

template <typename T>
Mat<T> Lstm<T>::Forward(const Mat<T>& x, const Segments& seg,
                        Cache* cache) const {
  Require(x.cols() == in_, ErrorCode::kShapeMismatch, "lstm input width");
  const Index h = hidden_;
  Mat<T> gates = x * w_input.value;
  gates.rowwise() += bias.value.row(0);
  Mat<T> cell(x.rows(), h);
  Mat<T> hidden(x.rows(), h);
  RowVec<T> pre(4 * h);
  for (Index s = 0; s < seg.size(); ++s) {
    const Index len = seg.length(s);
    RowVec<T> h_prev = RowVec<T>::Zero(h);
    RowVec<T> c_prev = RowVec<T>::Zero(h);
    for (Index k = 0; k < len; ++k) {
      const Index r = reverse_ ? seg.end(s) - 1 - k : seg.begin(s) + k;
      pre.noalias() = gates.row(r) + h_prev * w_recurrent.value;
      for (Index j = 0; j < h; ++j) {
        const T ig = Sigmoid(pre[j]);
        const T fg = Sigmoid(pre[h + j]);
        const T gg = std::tanh(pre[2 * h + j]);
        const T og = Sigmoid(pre[3 * h + j]);
        const T c = fg * c_prev[j] + ig * gg;
        gates(r, j) = ig;
        gates(r, h + j) = fg;
        gates(r, 2 * h + j) = gg;
        gates(r, 3 * h + j) = og;
        cell(r, j) = c;
        hidden(r, j) = og * std::tanh(c);
      }
      h_prev = hidden.row(r);
      c_prev = cell.row(r);
    }
  }
  if (cache != nullptr) {
    cache->input = x;
    cache->gates = gates;
    cache->cell = cell;
    cache->hidden = hidden;
    cache->segments = seg;
  }
  return hidden;
}

template <typename T>
Mat<T> Lstm<T>::Backward(const Mat<T>& dh_out, const Cache& cache) {
  const Index h = hidden_;
  const Segments& seg = cache.segments;
  Mat<T> dpre = Mat<T>::Zero(dh_out.rows(), 4 * h);
  for (Index s = 0; s < seg.size(); ++s) {
    const Index len = seg.length(s);
    RowVec<T> dh_next = RowVec<T>::Zero(h);
    RowVec<T> dc_next = RowVec<T>::Zero(h);
    for (Index k = len - 1; k >= 0; --k) {
      const Index r = reverse_ ? seg.end(s) - 1 - k : seg.begin(s) + k;
      const bool has_prev = k > 0;
      const Index rp = reverse_ ? r + 1 : r - 1;
      for (Index j = 0; j < h; ++j) {
        const T ig = cache.gates(r, j);
        const T fg = cache.gates(r, h + j);
        const T gg = cache.gates(r, 2 * h + j);
        const T og = cache.gates(r, 3 * h + j);
        const T c = cache.cell(r, j);
        const T tc = std::tanh(c);
        const T c_prev = has_prev ? cache.cell(rp, j) : T(0);
        const T dh = dh_out(r, j) + dh_next[j];
        const T dc = dh * og * (T(1) - tc * tc) + dc_next[j];
        dpre(r, j) = dc * gg * ig * (T(1) - ig);
        dpre(r, h + j) = dc * c_prev * fg * (T(1) - fg);
        dpre(r, 2 * h + j) = dc * ig * (T(1) - gg * gg);
        dpre(r, 3 * h + j) = dh * tc * og * (T(1) - og);
        dc_next[j] = dc * fg;
      }
      dh_next.noalias() = dpre.row(r) * w_recurrent.value.transpose();
      if (has_prev)
        w_recurrent.grad.noalias() +=
            cache.hidden.row(rp).transpose() * dpre.row(r);
    }
  }
  w_input.grad.noalias() += cache.input.transpose() * dpre;
  bias.grad.row(0) += dpre.colwise().sum();
  return dpre * w_input.value.transpose();
}

template <typename T>
void Lstm<T>::Collect(const std::string& prefix, ParamList<T>* out) {
  out->push_back({prefix + ".w_input", &w_input});
  out->push_back({prefix + ".w_recurrent", &w_recurrent});
  out->push_back({prefix + ".bias", &bias});
}

// ---------------------------------------------------------------- BiLstm

template <typename T>
BiLstm<T>::BiLstm(Index in, Index hidden, BiMerge merge, Rng* rng)
    : fwd(in, hidden, false, rng), bwd(in, hidden, true, rng), merge_(merge) {}

template <typename T>
Mat<T> BiLstm<T>::Forward(const Mat<T>& x, const Segments& seg,
                          Cache* cache) const {
  Mat<T> a = fwd.Forward(x, seg, cache ? &cache->forward : nullptr);
  Mat<T> b = bwd.Forward(x, seg, cache ? &cache->backward : nullptr);
  if (merge_ == BiMerge::kSum) return a + b;
  Mat<T> out(x.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

template <typename T>
Mat<T> BiLstm<T>::Backward(const Mat<T>& dy, const Cache& cache) {
  const Index h = fwd.hidden_size();
  if (merge_ == BiMerge::kSum) {
    return fwd.Backward(dy, cache.forward) + bwd.Backward(dy, cache.backward);
  }
  Mat<T> da = dy.leftCols(h);
  Mat<T> db = dy.rightCols(h);
  return fwd.Backward(da, cache.forward) + bwd.Backward(db, cache.backward);
}

template <typename T>
void BiLstm<T>::Collect(const std::string& prefix, ParamList<T>* out) {
  fwd.Collect(prefix + ".forward", out);
  bwd.Collect(prefix + ".backward", out);
}

#define GLOWVC_INSTANTIATE(T)                                    \
  template void UniformInit<T>(Mat<T>*, double, Rng*);           \
  template class Conv1d<T>;                                      \
  template class Linear<T>;                                      \
  template class Embedding<T>;                                   \
  template class BatchNorm<T>;                                   \
  template class Lstm<T>;                                        \
  template class BiLstm<T>;

GLOWVC_INSTANTIATE(float)
GLOWVC_INSTANTIATE(double)

#undef GLOWVC_INSTANTIATE

}  // namespace glowvc::nn
