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


// Adamax optimization with linear warm-up, gradient clipping, the training
// loop and the finite-difference gradient check.

#ifndef GLOWVC_TRAIN_H_
#define GLOWVC_TRAIN_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "glowvc/model.h"

namespace glowvc {

struct TrainConfig {
  int batch_size = 32;
  double learning_rate = 1e-4;
  int warmup_epochs = 5;
  int max_steps = 2000;
  uint64_t seed = 0;
  bool clip_gradients = true;
  double clip_norm = 5.0;
  int checkpoint_every = 0;   // 0 disables periodic checkpoints
  bool zero_wall_time = false;  // report wall_ms = 0 for reproducible logs

  // Batch 16, learning rate 5e-3: sized for a few thousand steps on one core.
  static TrainConfig Desk();

  void Validate() const;
};

template <typename T>
struct OptimizerState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  std::vector<std::string> names;
  std::vector<Mat<T>> m;
  std::vector<Mat<T>> u;
  int64_t step = 0;

  // Zero moments shaped like `params`.
  static OptimizerState Zeros(const ParamList<T>& params);
};

// One Adamax update of every parameter from its accumulated grad.
template <typename T>
void AdamaxStep(const ParamList<T>& params, OptimizerState<T>* state,
                double lr);

// Linear ramp to `learning_rate` over warmup_epochs * steps_per_epoch steps.
double LrSchedule(int64_t step, int64_t steps_per_epoch, const TrainConfig& cfg);

template <typename T>
double GlobalGradNorm(const ParamList<T>& params);

// Rescales all grads so their global norm is at most `max_norm`. Returns the
// norm before clipping.
template <typename T>
double ClipGradients(const ParamList<T>& params, double max_norm);

// Zeroes grads, then fills them with d(mean nll)/d(theta) for the batch.
template <typename T>
BatchLoss Gradients(GlowVcModel<T>& model,
                    std::span<const TrainingExample* const> batch,
                    const PassOptions& opt);

// Adds N(0, scale^2) noise to every parameter, e.g. to move zero-initialized
// layers off their dead paths before a gradient check.
template <typename T>
void PerturbParams(const ParamList<T>& params, double scale, uint64_t seed);

struct GradCheckEntry {
  std::string name;
  Index index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool ok = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;  // over entries judged by the relative rule
  Index failures = 0;
  Index params = 0;

  bool passed() const { return failures == 0; }
};

struct GradCheckOptions {
  double step = 1e-3;
  double rel_tol = 1e-3;
  double abs_tol = 1e-6;
  double small_magnitude = 1e-4;  // below this the absolute rule applies
};

// Central differences of mean nll against every scalar parameter.
GradCheckReport GradCheck(GlowVcModel<double>& model,
                          std::span<const TrainingExample* const> batch,
                          const PassOptions& opt,
                          const GradCheckOptions& check = {});

struct StepMetrics {
  int64_t step = 0;
  double nll = 0.0;
  double bits_per_dim = 0.0;
  double lr = 0.0;
  double wall_ms = 0.0;
};

// One newline-free JSON record {step, nll, bits_per_dim, lr, wall_ms}.
std::string FormatMetrics(const StepMetrics& m);

struct TrainHooks {
  std::function<void(const StepMetrics&)> on_step;
  std::function<void(int64_t step, GlowVcModel<float>&,
                     const OptimizerState<float>&)>
      on_checkpoint;
};

struct TrainResult {
  std::vector<StepMetrics> metrics;
  OptimizerState<float> optimizer;
};

// Seeded mini-batch training. Initializes actnorm from the first batch unless
// the flow is already initialized. `resume` continues from a saved state.
TrainResult Train(GlowVcModel<float>& model,
                  std::span<const TrainingExample> data,
                  const TrainConfig& cfg, const TrainHooks& hooks = {},
                  const OptimizerState<float>* resume = nullptr);

}  // namespace glowvc

#endif  // GLOWVC_TRAIN_H_
