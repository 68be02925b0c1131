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


#include "glowvc/train.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"

#include "glowvc/error.h"
#include "glowvc/synthlab.h"

namespace glowvc {

TrainConfig TrainConfig::Desk() {
  TrainConfig c;
  c.batch_size = 16;
  c.learning_rate = 5e-3;
  return c;
}

void TrainConfig::Validate() const {
  Require(batch_size >= 1, ErrorCode::kBadConfig, "batch_size must be >= 1");
  Require(learning_rate >= 0.0 && std::isfinite(learning_rate),
          ErrorCode::kBadConfig, "learning_rate must be >= 0");
  Require(warmup_epochs >= 0, ErrorCode::kBadConfig,
          "warmup_epochs must be >= 0");
  Require(max_steps >= 0, ErrorCode::kBadConfig, "max_steps must be >= 0");
  Require(clip_norm > 0.0, ErrorCode::kBadConfig, "clip_norm must be > 0");
  Require(checkpoint_every >= 0, ErrorCode::kBadConfig,
          "checkpoint_every must be >= 0");
}

template <typename T>
OptimizerState<T> OptimizerState<T>::Zeros(const ParamList<T>& params) {
  OptimizerState<T> s;
  for (const auto& p : params) {
    s.names.push_back(p.name);
    s.m.push_back(Mat<T>::Zero(p.param->value.rows(), p.param->value.cols()));
    s.u.push_back(Mat<T>::Zero(p.param->value.rows(), p.param->value.cols()));
  }
  return s;
}

template <typename T>
void AdamaxStep(const ParamList<T>& params, OptimizerState<T>* state,
                double lr) {
  using S = OptimizerState<T>;
  Require(state->m.size() == params.size(), ErrorCode::kShapeMismatch,
          "optimizer state does not match the parameter list");
  ++state->step;
  const T b1 = static_cast<T>(S::kBeta1);
  const T b2 = static_cast<T>(S::kBeta2);
  const T eps = static_cast<T>(S::kEpsilon);
  const T rate = static_cast<T>(
      lr / (1.0 - std::pow(S::kBeta1, static_cast<double>(state->step))));
  for (size_t k = 0; k < params.size(); ++k) {
    Param<T>& p = *params[k].param;
    Mat<T>& m = state->m[k];
    Mat<T>& u = state->u[k];
    Require(m.rows() == p.value.rows() && m.cols() == p.value.cols(),
            ErrorCode::kShapeMismatch, "optimizer moment shape of " +
                                           params[k].name);
    m = b1 * m + (T(1) - b1) * p.grad;
    u = (b2 * u).cwiseMax(p.grad.cwiseAbs());
    p.value.array() -= rate * m.array() / (u.array() + eps);
  }
}

double LrSchedule(int64_t step, int64_t steps_per_epoch,
                  const TrainConfig& cfg) {
  const double warmup =
      static_cast<double>(cfg.warmup_epochs) * static_cast<double>(steps_per_epoch);
  if (warmup <= 0.0) return cfg.learning_rate;
  return cfg.learning_rate * std::min(1.0, static_cast<double>(step) / warmup);
}

template <typename T>
double GlobalGradNorm(const ParamList<T>& params) {
  double sq = 0.0;
  for (const auto& p : params)
    sq += p.param->grad.template cast<double>().squaredNorm();
  return std::sqrt(sq);
}

template <typename T>
double ClipGradients(const ParamList<T>& params, double max_norm) {
  const double norm = GlobalGradNorm(params);
  if (norm > max_norm) {
    const T scale = static_cast<T>(max_norm / norm);
    for (const auto& p : params) p.param->grad *= scale;
  }
  return norm;
}

template <typename T>
BatchLoss Gradients(GlowVcModel<T>& model,
                    std::span<const TrainingExample* const> batch,
                    const PassOptions& opt) {
  ZeroGrads(model.Params());
  return BatchNll(model, batch, opt, true);
}

template <typename T>
void PerturbParams(const ParamList<T>& params, double scale, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  for (const auto& p : params) {
    Mat<T>& v = p.param->value;
    for (Index i = 0; i < v.size(); ++i) v.data()[i] += static_cast<T>(dist(rng));
  }
}

GradCheckReport GradCheck(GlowVcModel<double>& model,
                          std::span<const TrainingExample* const> batch,
                          const PassOptions& opt,
                          const GradCheckOptions& check) {
  PassOptions frozen = opt;
  frozen.update_running_stats = false;
  const ParamList<double> params = model.Params();
  Gradients(model, batch, frozen);
  GradCheckReport report;
  for (const auto& p : params) {
    Mat<double>& value = p.param->value;
    for (Index i = 0; i < value.size(); ++i) {
      const double saved = value.data()[i];
      value.data()[i] = saved + check.step;
      const double up = BatchNll(model, batch, frozen, false).mean_nll;
      value.data()[i] = saved - check.step;
      const double down = BatchNll(model, batch, frozen, false).mean_nll;
      value.data()[i] = saved;

      GradCheckEntry e;
      e.name = p.name;
      e.index = i;
      e.analytic = p.param->grad.data()[i];
      e.numeric = (up - down) / (2.0 * check.step);
      const double diff = std::abs(e.analytic - e.numeric);
      const double mag = std::max(std::abs(e.analytic), std::abs(e.numeric));
      e.rel_error = mag > 0.0 ? diff / mag : 0.0;
      if (mag < check.small_magnitude) {
        e.ok = diff <= check.abs_tol;
      } else {
        e.ok = e.rel_error <= check.rel_tol;
        report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
      }
      if (!e.ok) ++report.failures;
      report.entries.push_back(e);
    }
  }
  report.params = static_cast<Index>(report.entries.size());
  return report;
}

std::string FormatMetrics(const StepMetrics& m) {
  nlohmann::ordered_json j;
  j["step"] = m.step;
  j["nll"] = m.nll;
  j["bits_per_dim"] = m.bits_per_dim;
  j["lr"] = m.lr;
  j["wall_ms"] = m.wall_ms;
  return j.dump();
}

TrainResult Train(GlowVcModel<float>& model,
                  std::span<const TrainingExample> data,
                  const TrainConfig& cfg, const TrainHooks& hooks,
                  const OptimizerState<float>* resume) {
  cfg.Validate();
  Require(!data.empty(), ErrorCode::kInsufficientData, "no training data");
  const ParamList<float> params = model.Params();
  TrainResult result;
  result.optimizer = resume ? *resume : OptimizerState<float>::Zeros(params);
  Require(result.optimizer.m.size() == params.size(), ErrorCode::kShapeMismatch,
          "resumed optimizer state does not match the model");

  const size_t n = data.size();
  const size_t bs = std::min(static_cast<size_t>(cfg.batch_size), n);
  const int64_t steps_per_epoch = static_cast<int64_t>((n + bs - 1) / bs);
  std::mt19937_64 rng(cfg.seed);
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  size_t cursor = n;  // forces a shuffle before the first batch
  // Replay the shuffles of already-completed steps so resumption continues
  // the same batch sequence.
  for (int64_t s = 0; s < result.optimizer.step; ++s) {
    if (cursor + bs > n) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    cursor += bs;
  }

  std::vector<const TrainingExample*> batch(bs);
  for (int64_t step = result.optimizer.step + 1; step <= cfg.max_steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cursor + bs > n) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    for (size_t k = 0; k < bs; ++k) batch[k] = &data[order[cursor + k]];
    cursor += bs;

    if (!model.flow.initialized()) InitializeActNorm<float>(model, batch);

    PassOptions opt;
    opt.training = true;
    opt.update_running_stats = true;
    opt.dropout_seed = cfg.seed * 0x9E3779B97F4A7C15ULL + static_cast<uint64_t>(step);
    BatchLoss loss;
    try {
      loss = Gradients<float>(model, batch, opt);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kNonFiniteLoss)
        Fail(ErrorCode::kNonFiniteLoss,
             "non-finite loss at step " + std::to_string(step));
      throw;
    }
    if (cfg.clip_gradients) ClipGradients(params, cfg.clip_norm);
    const double lr = LrSchedule(step, steps_per_epoch, cfg);
    AdamaxStep(params, &result.optimizer, lr);

    StepMetrics m;
    m.step = step;
    m.nll = loss.mean_nll;
    m.bits_per_dim =
        BitsPerDim(loss.total_nll, loss.valid_frames, model.config().n_mels);
    m.lr = lr;
    if (!cfg.zero_wall_time) {
      m.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    }
    result.metrics.push_back(m);
    if (hooks.on_step) hooks.on_step(m);
    if (hooks.on_checkpoint && cfg.checkpoint_every > 0 &&
        step % cfg.checkpoint_every == 0 && step != cfg.max_steps)
      hooks.on_checkpoint(step, model, result.optimizer);
  }
  if (hooks.on_checkpoint)
    hooks.on_checkpoint(result.optimizer.step, model, result.optimizer);
  return result;
}

#define GLOWVC_INSTANTIATE(T)                                                 \
  template struct OptimizerState<T>;                                          \
  template void AdamaxStep<T>(const ParamList<T>&, OptimizerState<T>*,        \
                              double);                                        \
  template void PerturbParams<T>(const ParamList<T>&, double, uint64_t);      \
  template double GlobalGradNorm<T>(const ParamList<T>&);                     \
  template double ClipGradients<T>(const ParamList<T>&, double);              \
  template BatchLoss Gradients<T>(GlowVcModel<T>&,                            \
                                  std::span<const TrainingExample* const>,    \
                                  const PassOptions&);

GLOWVC_INSTANTIATE(float)
GLOWVC_INSTANTIATE(double)

#undef GLOWVC_INSTANTIATE

}  // namespace glowvc
