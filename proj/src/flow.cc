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


#include "glowvc/flow.h"

#include <cmath>
#include <utility>

#include "glowvc/error.h"

namespace glowvc::flow {

namespace {

std::vector<double> ZeroLogdet(const Segments& seg) {
  return std::vector<double>(static_cast<size_t>(seg.size()), 0.0);
}

void AddScaled(std::vector<double>* acc, const std::vector<double>& v) {
  for (size_t i = 0; i < acc->size(); ++i) (*acc)[i] += v[i];
}

// Sum over items of dlogdet_i * length_i.
double WeightedFrames(const Segments& seg, const std::vector<double>& dlogdet) {
  double total = 0.0;
  for (Index i = 0; i < seg.size(); ++i)
    total += dlogdet[i] * static_cast<double>(seg.length(i));
  return total;
}

}  // namespace

// --------------------------------------------------------------- ActNorm

template <typename T>
ActNorm<T>::ActNorm(Index channels) : log_scale(1, channels), bias(1, channels) {}

template <typename T>
void ActNorm<T>::InitializeFrom(const Mat<T>& x) {
  if (x.rows() == 0) return;
  const Eigen::RowVectorXd xd_mean = x.template cast<double>().colwise().mean();
  const Eigen::RowVectorXd var =
      (x.template cast<double>().rowwise() - xd_mean)
          .array()
          .square()
          .colwise()
          .mean();
  for (Index c = 0; c < x.cols(); ++c) {
    const double std = std::max(std::sqrt(var[c]), 1e-6);
    log_scale.value(0, c) = static_cast<T>(-std::log(std));
    bias.value(0, c) = static_cast<T>(-xd_mean[c] / std);
  }
  set_initialized(true);
}

template <typename T>
LayerOutput<T> ActNorm<T>::Apply(const Mat<T>& x, const Segments& seg,
                                 Direction dir) const {
  Require(x.cols() == log_scale.value.cols(), ErrorCode::kShapeMismatch,
          "actnorm channel count");
  const double sum_log = log_scale.value.template cast<double>().sum();
  LayerOutput<T> out;
  out.logdet.resize(static_cast<size_t>(seg.size()));
  if (dir == Direction::kForward) {
    const RowVec<T> scale = log_scale.value.row(0).array().exp();
    out.frames = x.array().rowwise() * scale.array();
    out.frames.rowwise() += bias.value.row(0);
    for (Index i = 0; i < seg.size(); ++i)
      out.logdet[i] = sum_log * static_cast<double>(seg.length(i));
  } else {
    Require(initialized(), ErrorCode::kNotInitialized,
            "actnorm inverse before data-dependent initialization");
    const RowVec<T> inv_scale = (-log_scale.value.row(0).array()).exp();
    out.frames = (x.rowwise() - bias.value.row(0)).array().rowwise() *
                 inv_scale.array();
    for (Index i = 0; i < seg.size(); ++i)
      out.logdet[i] = -sum_log * static_cast<double>(seg.length(i));
  }
  return out;
}

template <typename T>
Mat<T> ActNorm<T>::Backward(const Mat<T>& dy, const Mat<T>& x,
                            const Segments& seg,
                            const std::vector<double>& dlogdet) {
  const RowVec<T> scale = log_scale.value.row(0).array().exp();
  const RowVec<T> dscaled = (dy.array() * x.array()).colwise().sum();
  log_scale.grad.row(0).array() += dscaled.array() * scale.array() +
                                   static_cast<T>(WeightedFrames(seg, dlogdet));
  bias.grad.row(0) += dy.colwise().sum();
  return dy.array().rowwise() * scale.array();
}

template <typename T>
void ActNorm<T>::Collect(const std::string& prefix, ParamList<T>* params,
                         BufferList<T>* buffers) {
  params->push_back({prefix + ".log_scale", &log_scale});
  params->push_back({prefix + ".bias", &bias});
  buffers->push_back({prefix + ".initialized", &initialized_});
}

// ------------------------------------------------------------- InvLinear

template <typename T>
InvLinear<T> InvLinear<T>::FromMatrix(const Eigen::MatrixXd& w) {
  const Index c = w.rows();
  Require(w.cols() == c, ErrorCode::kShapeMismatch, "mixing matrix not square");
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(w);
  const Eigen::MatrixXd packed = lu.matrixLU();
  // w = P^T L U with P the row pivoting applied by the factorization.
  const Eigen::MatrixXd pt = lu.permutationP().transpose().toDenseMatrix()
                                 .template cast<double>();
  InvLinear<T> layer;
  layer.lower = Param<T>(c, c);
  layer.upper = Param<T>(c, c);
  layer.log_diag = Param<T>(1, c);
  layer.perm = Mat<T>::Zero(1, c);
  layer.sign = Mat<T>::Ones(1, c);
  for (Index i = 0; i < c; ++i) {
    for (Index j = 0; j < c; ++j) {
      if (pt(i, j) != 0.0) layer.perm(0, i) = static_cast<T>(j);
      if (j < i) layer.lower.value(i, j) = static_cast<T>(packed(i, j));
      if (j > i) layer.upper.value(i, j) = static_cast<T>(packed(i, j));
    }
    const double d = packed(i, i);
    Require(d != 0.0, ErrorCode::kShapeMismatch, "mixing matrix is singular");
    layer.sign(0, i) = d < 0 ? T(-1) : T(1);
    layer.log_diag.value(0, i) = static_cast<T>(std::log(std::abs(d)));
  }
  return layer;
}

template <typename T>
InvLinear<T>::InvLinear(Index channels, bool identity, nn::Rng* rng) {
  if (identity) {
    *this = FromMatrix(Eigen::MatrixXd::Identity(channels, channels));
    return;
  }
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd g(channels, channels);
  for (Index i = 0; i < g.size(); ++i) g.data()[i] = dist(*rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  *this = FromMatrix(qr.householderQ() * Eigen::MatrixXd::Identity(channels, channels));
}

template <typename T>
Mat<T> InvLinear<T>::Lower() const {
  const Index c = channels();
  Mat<T> l = Mat<T>::Identity(c, c);
  l.template triangularView<Eigen::StrictlyLower>() = lower.value;
  return l;
}

template <typename T>
Mat<T> InvLinear<T>::UpperWithDiag() const {
  const Index c = channels();
  Mat<T> v = Mat<T>::Zero(c, c);
  v.template triangularView<Eigen::StrictlyUpper>() = upper.value;
  for (Index i = 0; i < c; ++i)
    v(i, i) = sign(0, i) * std::exp(log_diag.value(0, i));
  return v;
}

template <typename T>
Mat<T> InvLinear<T>::Permute(const Mat<T>& m) const {
  Mat<T> out(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i)
    out.row(i) = m.row(static_cast<Index>(perm(0, i)));
  return out;
}

template <typename T>
Mat<T> InvLinear<T>::Unpermute(const Mat<T>& m) const {
  Mat<T> out(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i)
    out.row(static_cast<Index>(perm(0, i))) = m.row(i);
  return out;
}

template <typename T>
Mat<T> InvLinear<T>::Weight() const {
  return Permute(Lower() * UpperWithDiag());
}

template <typename T>
Mat<T> InvLinear<T>::InverseWeight() const {
  const Index c = channels();
  // W^-1 = V^-1 L^-1 P^T
  Mat<double> m = Unpermute(Mat<T>::Identity(c, c)).template cast<double>();
  const Mat<double> l = Lower().template cast<double>();
  const Mat<double> v = UpperWithDiag().template cast<double>();
  l.template triangularView<Eigen::UnitLower>().solveInPlace(m);
  v.template triangularView<Eigen::Upper>().solveInPlace(m);
  return m.template cast<T>();
}

template <typename T>
double InvLinear<T>::LogAbsDet() const {
  return log_diag.value.template cast<double>().sum();
}

template <typename T>
LayerOutput<T> InvLinear<T>::Apply(const Mat<T>& x, const Segments& seg,
                                   Direction dir) const {
  Require(x.cols() == channels(), ErrorCode::kShapeMismatch,
          "mixing channel count");
  const double per_frame = LogAbsDet();
  LayerOutput<T> out;
  out.logdet.resize(static_cast<size_t>(seg.size()));
  if (dir == Direction::kForward) {
    out.frames = x * Weight().transpose();
  } else {
    out.frames = x * InverseWeight().transpose();
  }
  const double sgn = dir == Direction::kForward ? 1.0 : -1.0;
  for (Index i = 0; i < seg.size(); ++i)
    out.logdet[i] = sgn * per_frame * static_cast<double>(seg.length(i));
  return out;
}

template <typename T>
Mat<T> InvLinear<T>::Backward(const Mat<T>& dy, const Mat<T>& x,
                              const Segments& seg,
                              const std::vector<double>& dlogdet) {
  const Index c = channels();
  const Mat<T> l = Lower();
  const Mat<T> v = UpperWithDiag();
  const Mat<T> w = Permute(l * v);
  const Mat<T> dw = dy.transpose() * x;
  const Mat<T> dlv = Unpermute(dw);
  const Mat<T> dl = dlv * v.transpose();
  const Mat<T> dv = l.transpose() * dlv;
  lower.grad.template triangularView<Eigen::StrictlyLower>() +=
      dl.template triangularView<Eigen::StrictlyLower>().toDenseMatrix();
  upper.grad.template triangularView<Eigen::StrictlyUpper>() +=
      dv.template triangularView<Eigen::StrictlyUpper>().toDenseMatrix();
  const T frames = static_cast<T>(WeightedFrames(seg, dlogdet));
  for (Index i = 0; i < c; ++i)
    log_diag.grad(0, i) += dv(i, i) * v(i, i) + frames;
  return dy * w;
}

template <typename T>
void InvLinear<T>::Collect(const std::string& prefix, ParamList<T>* params,
                           BufferList<T>* buffers) {
  params->push_back({prefix + ".lower", &lower});
  params->push_back({prefix + ".upper", &upper});
  params->push_back({prefix + ".log_diag", &log_diag});
  buffers->push_back({prefix + ".perm", &perm});
  buffers->push_back({prefix + ".sign", &sign});
}

// -------------------------------------------------------------- Coupling

template <typename T>
Coupling<T>::Coupling(const CouplingConfig& cfg, nn::Rng* rng)
    : conv_in(cfg.channels / 2, cfg.hidden, cfg.kernel, rng),
      conv_hidden(cfg.hidden, cfg.hidden, cfg.kernel, rng),
      conv_out(cfg.hidden, cfg.channels, 1, rng),
      sigma(1, 1),
      cfg_(cfg) {
  Require(cfg.channels % 2 == 0 && cfg.channels >= 2, ErrorCode::kBadConfig,
          "coupling needs an even channel count");
  conv_out.weight.value.setZero();
  conv_out.bias.value.setZero();
  sigma.value.setOnes();
  if (cfg.cond_dim > 0) cond_proj = nn::Linear<T>(cfg.cond_dim, cfg.hidden, rng);
}

template <typename T>
void Coupling<T>::CheckCondition(const Mat<T>* cond, const Segments& seg) const {
  if (conditional()) {
    Require(cond != nullptr && cond->size() > 0, ErrorCode::kConditionMissing,
            "conditional coupling called without a condition");
    Require(cond->rows() == seg.size() && cond->cols() == cfg_.cond_dim,
            ErrorCode::kShapeMismatch, "condition shape");
  } else {
    Require(cond == nullptr || cond->size() == 0,
            ErrorCode::kConditionUnexpected,
            "unconditioned coupling called with a condition");
  }
}

template <typename T>
void Coupling<T>::Network(const Mat<T>& a, const Segments& seg,
                          const Mat<T>* cond, Mat<T>* log_scale, Mat<T>* shift,
                          Cache* cache) const {
  const Index half = cfg_.channels / 2;
  Mat<T> h1 = conv_in.Forward(a, seg, cache ? &cache->conv_in : nullptr);
  if (conditional()) {
    const Mat<T> proj = cond_proj.Forward(*cond);
    for (Index i = 0; i < seg.size(); ++i)
      h1.middleRows(seg.begin(i), seg.length(i)).rowwise() += proj.row(i);
  }
  h1 = h1.array().tanh();
  Mat<T> h2 =
      conv_hidden.Forward(h1, seg, cache ? &cache->conv_hidden : nullptr);
  h2 = h2.array().tanh();
  const Mat<T> o = conv_out.Forward(h2, seg, cache ? &cache->conv_out : nullptr);
  Mat<T> squashed = o.leftCols(half).array().tanh();
  *log_scale = sigma.value(0, 0) * squashed;
  *shift = o.rightCols(half);
  if (cache != nullptr) {
    cache->h1 = std::move(h1);
    cache->h2 = std::move(h2);
    cache->squashed = std::move(squashed);
    cache->log_scale = *log_scale;
    if (conditional()) cache->cond = *cond;
  }
}

template <typename T>
LayerOutput<T> Coupling<T>::Apply(const Mat<T>& x, const Segments& seg,
                                  const Mat<T>* cond, Direction dir,
                                  Cache* cache) const {
  Require(x.cols() == cfg_.channels, ErrorCode::kShapeMismatch,
          "coupling channel count");
  CheckCondition(cond, seg);
  const Index half = cfg_.channels / 2;
  const Mat<T> a = x.leftCols(half);
  const Mat<T> b = x.rightCols(half);
  Mat<T> log_scale, shift;
  Network(a, seg, cond, &log_scale, &shift, cache);
  LayerOutput<T> out;
  out.frames.resize(x.rows(), x.cols());
  out.frames.leftCols(half) = a;
  if (dir == Direction::kForward) {
    out.frames.rightCols(half) =
        (b.array() * log_scale.array().exp()).matrix() + shift;
  } else {
    out.frames.rightCols(half) =
        ((b - shift).array() * (-log_scale.array()).exp()).matrix();
  }
  const double sgn = dir == Direction::kForward ? 1.0 : -1.0;
  out.logdet = ZeroLogdet(seg);
  for (Index i = 0; i < seg.size(); ++i) {
    out.logdet[i] = sgn * log_scale.middleRows(seg.begin(i), seg.length(i))
                              .template cast<double>()
                              .sum();
  }
  if (cache != nullptr) {
    cache->a = a;
    cache->b = b;
  }
  return out;
}

template <typename T>
Mat<T> Coupling<T>::Backward(const Mat<T>& dy, const Segments& seg,
                             const std::vector<double>& dlogdet,
                             const Cache& cache, Mat<T>* dcond) {
  const Index half = cfg_.channels / 2;
  const Mat<T> dyb = dy.rightCols(half);
  const Mat<T> scale = cache.log_scale.array().exp();
  Mat<T> dls = (dyb.array() * cache.b.array() * scale.array()).matrix();
  for (Index i = 0; i < seg.size(); ++i)
    dls.middleRows(seg.begin(i), seg.length(i)).array() +=
        static_cast<T>(dlogdet[i]);
  sigma.grad(0, 0) += (dls.array() * cache.squashed.array()).sum();
  Mat<T> dout(dy.rows(), cfg_.channels);
  dout.leftCols(half) =
      (dls.array() * sigma.value(0, 0) *
       (T(1) - cache.squashed.array().square()))
          .matrix();
  dout.rightCols(half) = dyb;
  Mat<T> dh2 = conv_out.Backward(dout, cache.conv_out);
  dh2.array() *= T(1) - cache.h2.array().square();
  Mat<T> dh1 = conv_hidden.Backward(dh2, cache.conv_hidden);
  dh1.array() *= T(1) - cache.h1.array().square();
  if (conditional()) {
    Mat<T> dproj(seg.size(), cfg_.hidden);
    for (Index i = 0; i < seg.size(); ++i)
      dproj.row(i) = dh1.middleRows(seg.begin(i), seg.length(i)).colwise().sum();
    const Mat<T> dc = cond_proj.Backward(dproj, cache.cond);
    if (dcond != nullptr) {
      if (dcond->size() == 0) *dcond = Mat<T>::Zero(dc.rows(), dc.cols());
      *dcond += dc;
    }
  }
  Mat<T> dx(dy.rows(), cfg_.channels);
  dx.leftCols(half) = dy.leftCols(half) + conv_in.Backward(dh1, cache.conv_in);
  dx.rightCols(half) = (dyb.array() * scale.array()).matrix();
  return dx;
}

template <typename T>
void Coupling<T>::Collect(const std::string& prefix, ParamList<T>* params) {
  conv_in.Collect(prefix + ".conv_in", params);
  conv_hidden.Collect(prefix + ".conv_hidden", params);
  conv_out.Collect(prefix + ".conv_out", params);
  if (conditional()) cond_proj.Collect(prefix + ".cond_proj", params);
  params->push_back({prefix + ".sigma", &sigma});
}

// --------------------------------------------------------------- Squeeze

template <typename T>
Squeezed<T> Squeeze(const Mat<T>& x, const Segments& seg, Index factor) {
  Require(factor >= 1, ErrorCode::kBadConfig, "squeeze factor must be >= 1");
  Require(x.rows() == seg.total(), ErrorCode::kShapeMismatch,
          "frames do not match segments");
  const Index c = x.cols();
  std::vector<Index> body_len(seg.size()), held_len(seg.size());
  for (Index i = 0; i < seg.size(); ++i) {
    body_len[i] = seg.length(i) / factor;
    held_len[i] = seg.length(i) - body_len[i] * factor;
  }
  Squeezed<T> s;
  s.factor = factor;
  s.body_segments = Segments::FromLengths(body_len);
  s.held_segments = Segments::FromLengths(held_len);
  s.body.resize(s.body_segments.total(), c * factor);
  s.held_out.resize(s.held_segments.total(), c);
  for (Index i = 0; i < seg.size(); ++i) {
    const Index b = seg.begin(i);
    for (Index j = 0; j < body_len[i]; ++j)
      for (Index k = 0; k < factor; ++k)
        s.body.block(s.body_segments.begin(i) + j, k * c, 1, c) =
            x.row(b + j * factor + k);
    if (held_len[i] > 0)
      s.held_out.middleRows(s.held_segments.begin(i), held_len[i]) =
          x.middleRows(b + body_len[i] * factor, held_len[i]);
  }
  return s;
}

template <typename T>
Mat<T> Unsqueeze(const Squeezed<T>& s) {
  const Index factor = s.factor;
  const Index c = s.body.cols() / factor;
  const Index n = s.body_segments.size();
  Require(s.held_segments.size() == n, ErrorCode::kShapeMismatch,
          "squeeze bookkeeping mismatch");
  Mat<T> x(s.body_segments.total() * factor + s.held_segments.total(),
           c > 0 ? c : s.held_out.cols());
  Index row = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < s.body_segments.length(i); ++j)
      for (Index k = 0; k < factor; ++k)
        x.row(row++) =
            s.body.block(s.body_segments.begin(i) + j, k * c, 1, c);
    for (Index j = 0; j < s.held_segments.length(i); ++j)
      x.row(row++) = s.held_out.row(s.held_segments.begin(i) + j);
  }
  return x;
}

// ------------------------------------------------------------- FlowStack

template <typename T>
FlowStack<T>::FlowStack(const FlowConfig& cfg, nn::Rng* rng) : cfg_(cfg) {
  Require(cfg.blocks >= 1, ErrorCode::kBadConfig, "flow needs >= 1 block");
  Require(cfg.squeeze >= 1, ErrorCode::kBadConfig, "squeeze factor >= 1");
  const Index c = cfg.channels * cfg.squeeze;
  CouplingConfig cc{c, cfg.hidden, cfg.kernel, cfg.cond_dim};
  blocks_.reserve(static_cast<size_t>(cfg.blocks));
  for (Index k = 0; k < cfg.blocks; ++k) {
    Block block{ActNorm<T>(c), InvLinear<T>(c, cfg.identity_init, rng),
                Coupling<T>(cc, rng)};
    if (cfg.identity_init) block.actnorm.set_initialized(true);
    blocks_.push_back(std::move(block));
  }
}

template <typename T>
bool FlowStack<T>::initialized() const {
  for (const auto& b : blocks_)
    if (!b.actnorm.initialized()) return false;
  return true;
}

template <typename T>
FlowOutput<T> FlowStack<T>::Forward(const Mat<T>& x, const Segments& seg,
                                    const Mat<T>* cond, Cache* cache) const {
  Require(x.cols() == cfg_.channels, ErrorCode::kShapeMismatch,
          "flow input has " + std::to_string(x.cols()) + " channels, expected " +
              std::to_string(cfg_.channels));
  Squeezed<T> sq = Squeeze(x, seg, cfg_.squeeze);
  const Segments& bs = sq.body_segments;
  FlowOutput<T> out;
  out.logdet = ZeroLogdet(seg);
  if (cache != nullptr) {
    cache->segments = seg;
    cache->body_segments = bs;
    cache->actnorm_in.clear();
    cache->mixing_in.clear();
    cache->coupling.assign(blocks_.size(), {});
  }
  Mat<T> h = std::move(sq.body);
  for (size_t k = 0; k < blocks_.size(); ++k) {
    const Block& blk = blocks_[k];
    if (cache != nullptr) cache->actnorm_in.push_back(h);
    auto an = blk.actnorm.Apply(h, bs, Direction::kForward);
    AddScaled(&out.logdet, an.logdet);
    if (cache != nullptr) cache->mixing_in.push_back(an.frames);
    auto mx = blk.mixing.Apply(an.frames, bs, Direction::kForward);
    AddScaled(&out.logdet, mx.logdet);
    auto cp = blk.coupling.Apply(mx.frames, bs, cond, Direction::kForward,
                                 cache ? &cache->coupling[k] : nullptr);
    AddScaled(&out.logdet, cp.logdet);
    h = std::move(cp.frames);
  }
  sq.body = std::move(h);
  out.z = Unsqueeze(sq);
  return out;
}

template <typename T>
Mat<T> FlowStack<T>::Inverse(const Mat<T>& z, const Segments& seg,
                             const Mat<T>* cond) const {
  Require(z.cols() == cfg_.channels, ErrorCode::kShapeMismatch,
          "flow latent channel count");
  Squeezed<T> sq = Squeeze(z, seg, cfg_.squeeze);
  const Segments& bs = sq.body_segments;
  Mat<T> h = std::move(sq.body);
  for (size_t k = blocks_.size(); k-- > 0;) {
    const Block& blk = blocks_[k];
    h = blk.coupling.Apply(h, bs, cond, Direction::kInverse).frames;
    h = blk.mixing.Apply(h, bs, Direction::kInverse).frames;
    h = blk.actnorm.Apply(h, bs, Direction::kInverse).frames;
  }
  sq.body = std::move(h);
  return Unsqueeze(sq);
}

template <typename T>
void FlowStack<T>::InitializeActNorm(const Mat<T>& x, const Segments& seg,
                                     const Mat<T>* cond) {
  Squeezed<T> sq = Squeeze(x, seg, cfg_.squeeze);
  const Segments& bs = sq.body_segments;
  Mat<T> h = std::move(sq.body);
  for (Block& blk : blocks_) {
    if (!blk.actnorm.initialized()) blk.actnorm.InitializeFrom(h);
    h = blk.actnorm.Apply(h, bs, Direction::kForward).frames;
    h = blk.mixing.Apply(h, bs, Direction::kForward).frames;
    h = blk.coupling.Apply(h, bs, cond, Direction::kForward).frames;
  }
}

template <typename T>
typename FlowStack<T>::Gradients FlowStack<T>::Backward(
    const Mat<T>& dz, const std::vector<double>& dlogdet, const Cache& cache) {
  const Segments& bs = cache.body_segments;
  Squeezed<T> sq = Squeeze(dz, cache.segments, cfg_.squeeze);
  Gradients g;
  Mat<T> dh = std::move(sq.body);
  for (size_t k = blocks_.size(); k-- > 0;) {
    Block& blk = blocks_[k];
    dh = blk.coupling.Backward(dh, bs, dlogdet, cache.coupling[k], &g.dcond);
    dh = blk.mixing.Backward(dh, cache.mixing_in[k], bs, dlogdet);
    dh = blk.actnorm.Backward(dh, cache.actnorm_in[k], bs, dlogdet);
  }
  sq.body = std::move(dh);
  g.dx = Unsqueeze(sq);
  return g;
}

template <typename T>
void FlowStack<T>::Collect(const std::string& prefix, ParamList<T>* params,
                           BufferList<T>* buffers) {
  for (size_t k = 0; k < blocks_.size(); ++k) {
    const std::string p = prefix + ".block" + std::to_string(k);
    blocks_[k].actnorm.Collect(p + ".actnorm", params, buffers);
    blocks_[k].mixing.Collect(p + ".mixing", params, buffers);
    blocks_[k].coupling.Collect(p + ".coupling", params);
  }
}

#define GLOWVC_INSTANTIATE(T)                                           \
  template class ActNorm<T>;                                            \
  template class InvLinear<T>;                                          \
  template class Coupling<T>;                                           \
  template class FlowStack<T>;                                          \
  template Squeezed<T> Squeeze<T>(const Mat<T>&, const Segments&, Index); \
  template Mat<T> Unsqueeze<T>(const Squeezed<T>&);

GLOWVC_INSTANTIATE(float)
GLOWVC_INSTANTIATE(double)

#undef GLOWVC_INSTANTIATE

}  // namespace glowvc::flow
