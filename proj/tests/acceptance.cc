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


// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit status if
// any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include "glowvc/app.h"
#include "glowvc/container.h"
#include "glowvc/convert.h"
#include "glowvc/error.h"
#include "glowvc/flow.h"
#include "glowvc/model.h"
#include "glowvc/synthlab.h"
#include "glowvc/train.h"
#include "test_util.h"

namespace glowvc {
namespace {

using testing::MaxAbsDiff;
using testing::NumericalLogAbsDet;
using testing::RandomMat;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Format(const char* fmt, double a, double b = 0.0, double c = 0.0,
                   double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), fmt, a, b, c, d);
  return buf;
}

std::vector<const TrainingExample*> Pointers(const std::vector<TrainingExample>& v) {
  std::vector<const TrainingExample*> out;
  for (const auto& e : v) out.push_back(&e);
  return out;
}

// Gaussian noise on every parameter, scaled down by the fan-in.
template <typename T>
void Perturb(const ParamList<T>& params, double scale, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  for (const auto& p : params) {
    const double s = scale / std::sqrt(static_cast<double>(p.param->value.rows()));
    for (Index i = 0; i < p.param->value.size(); ++i)
      p.param->value.data()[i] += static_cast<T>(s * d(rng));
  }
}

template <typename F>
ErrorCode CodeOf(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIo;
}

// ------------------------------------------------------------------------ 1

Outcome Bijectivity() {
  double worst = 0.0;
  for (Variant v : {Variant::kConditional, Variant::kExplicit}) {
    ModelConfig cfg = ModelConfig::Desk(v);
    cfg.seed = 1;
    GlowVcModel<float> model(cfg);
    const Index init_lengths[] = {32, 24};
    const auto init = RandomTrainingExamples(cfg, init_lengths, 2);
    InitializeActNorm<float>(model, Pointers(init));
    Perturb(model.Params(), 0.1, 3);
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<Index> length(8, 64);
    for (int k = 0; k < 100; ++k) {
      const Index t = length(rng);
      const Mat<float> x = RandomMat<float>(t, 80, 100 + k);
      const Segments seg = Segments::Single(t);
      const Mat<float> cond = model.FlowCondition(model.Speaker(k % 3));
      const Mat<float>* c = cond.size() ? &cond : nullptr;
      const auto z = model.flow.Forward(x, seg, c).z;
      worst = std::max(worst, MaxAbsDiff(model.flow.Inverse(z, seg, c), x));
    }
  }
  return {worst < 1e-4, Format("max |x - f^-1(f(x))| = %.3g over 200 inputs", worst)};
}

// ------------------------------------------------------------------------ 2

Outcome LogDetOracle() {
  double worst = 0.0;
  int trials = 0;
  for (Index channels : {2, 4, 6}) {
    for (int k = 0; k < 50; ++k) {
      flow::FlowConfig cfg;
      cfg.channels = channels;
      cfg.squeeze = 1;
      cfg.blocks = 2;
      cfg.hidden = 5;
      nn::Rng rng(1000 * channels + k);
      flow::FlowStack<double> stack(cfg, &rng);
      const Index t = 1 + k % 4;
      stack.InitializeActNorm(RandomMat<double>(8, channels, k, 2.0),
                              Segments::Single(8), nullptr);
      ParamList<double> params;
      BufferList<double> buffers;
      stack.Collect("flow", &params, &buffers);
      Perturb(params, 0.5, 7 * k + channels);
      const Mat<double> x = RandomMat<double>(t, channels, 50 + k);
      const Segments seg = Segments::Single(t);
      const double analytic = stack.Forward(x, seg, nullptr).logdet[0];
      const double numeric = NumericalLogAbsDet(
          [&](const Mat<double>& v) { return stack.Forward(v, seg, nullptr).z; }, x);
      worst = std::max(worst,
                       std::abs(analytic - numeric) / std::max(std::abs(numeric), 1.0));
      ++trials;
    }
  }
  return {worst < 1e-3,
          Format("max relative error %.3g over %.0f parameterizations", worst, trials)};
}

// ------------------------------------------------------------------------ 3

Outcome DensityNormalization() {
  ModelConfig cfg = ModelConfig::Tiny(Variant::kConditional);
  cfg.squeeze = 1;
  cfg.identity_init = true;
  GlowVcModel<double> model(cfg);
  PerturbParams(model.Params(), 0.3, 5);
  const Index lengths[] = {1};
  const auto ex = RandomTrainingExamples(cfg, lengths, 6);
  const ConditioningBundle b{ex[0].content, NormalizedPitch{ex[0].pitch},
                             model.Speaker(ex[0].speaker_id)};
  const double h = 0.05;
  double mass = 0.0;
  Mat<double> x(1, 2);
  for (int i = 0; i < 240; ++i) {
    for (int j = 0; j < 240; ++j) {
      x << -6.0 + (i + 0.5) * h, -6.0 + (j + 0.5) * h;
      mass += std::exp(-Nll(x, b, model)) * h * h;
    }
  }
  return {mass >= 0.9 && mass <= 1.1,
          Format("integral of exp(-nll) over [-6,6]^2 = %.5f", mass)};
}

// ------------------------------------------------------------------------ 4

Outcome GradientOracle() {
  double worst = 0.0;
  Index failures = 0;
  std::string sizes;
  for (Variant v : {Variant::kConditional, Variant::kExplicit}) {
    const ModelConfig cfg = ModelConfig::Tiny(v);
    GlowVcModel<double> model(cfg);
    const Index lengths[] = {5, 4};
    const auto ex = RandomTrainingExamples(cfg, lengths, 7);
    const auto batch = Pointers(ex);
    InitializeActNorm(model, batch);
    PerturbParams(model.Params(), 0.1, 8);
    for (bool training : {false, true}) {
      PassOptions opt;
      opt.training = training;
      opt.dropout_seed = 9;
      const GradCheckReport r = GradCheck(model, batch, opt);
      if (r.params > 500) ++failures;
      failures += r.failures;
      worst = std::max(worst, r.max_rel_error);
    }
    sizes += (sizes.empty() ? "" : "/") + std::to_string(CountParams(model.Params()));
  }
  return {failures == 0 && worst < 1e-3,
          Format("max relative error %.3g, failures %.0f, parameters ", worst,
                 static_cast<double>(failures)) +
              sizes};
}

// --------------------------------------------------------------------- 5, 7

struct Trained {
  GlowVcModel<float> model;
  EvalReport report;
  double seconds = 0.0;
};

Trained TrainVariant(Variant v, const SyntheticCorpus& corpus,
                     const std::vector<TrainingExample>& train) {
  const auto t0 = std::chrono::steady_clock::now();
  ModelConfig cfg = ModelConfig::Desk(v);
  cfg.n_speakers = corpus.config.n_speakers;
  cfg.n_languages = corpus.config.n_languages;
  cfg.phoneme_vocab = corpus.config.phoneme_vocab_size;
  Trained t{GlowVcModel<float>(cfg), {}, 0.0};
  TrainConfig tc = TrainConfig::Desk();
  tc.max_steps = 2000;
  Train(t.model, train, tc);
  t.report = EvaluateModel(t.model, corpus, 100, 11);
  t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return t;
}

Outcome TrainingProgress(const Trained& cond, const Trained& expl) {
  const bool pass = cond.report.bits_per_dim < cond.report.baseline_bits_per_dim &&
                    expl.report.bits_per_dim < expl.report.baseline_bits_per_dim;
  return {pass,
          Format("held-out bits/dim conditional %.4f, explicit %.4f, baseline %.4f",
                 cond.report.bits_per_dim, expl.report.bits_per_dim,
                 expl.report.baseline_bits_per_dim) +
              Format(" (%.0f s + %.0f s)", cond.seconds, expl.seconds)};
}

Outcome Disentanglement(const Trained& expl) {
  const EvalReport& r = expl.report;
  return {r.speaker_transfer_accuracy >= 0.90 && r.content_preservation_score >= 0.85,
          Format("speaker_transfer_accuracy %.3f, content_preservation_score %.4f "
                 "over %.0f conversions",
                 r.speaker_transfer_accuracy, r.content_preservation_score, r.pairs)};
}

// ------------------------------------------------------------------------ 6

// Copy of a trained model with every parameter and buffer widened to double.
GlowVcModel<double> Widen(GlowVcModel<float>& m) {
  GlowVcModel<double> out(m.config());
  const auto src = m.Params();
  const auto dst = out.Params();
  for (size_t k = 0; k < src.size(); ++k)
    dst[k].param->value = src[k].param->value.cast<double>();
  const auto sb = m.Buffers();
  const auto db = out.Buffers();
  for (size_t k = 0; k < sb.size(); ++k) *db[k].value = sb[k].value->cast<double>();
  return out;
}

struct IdentityErrors {
  double round_trip = 0.0;
  double idempotence = 0.0;
  double preserved = 0.0;
};

template <typename T>
IdentityErrors MeasureIdentities(const GlowVcModel<T>& cond, const GlowVcModel<T>& expl,
                                 const std::vector<TrainingExample>& test) {
  IdentityErrors r;
  for (size_t k = 0; k < test.size(); k += 3) {
    const TrainingExample& e = test[k];
    const Mat<T> x = e.mel.cast<T>();
    const int target = (e.speaker_id + 1) % 3;
    const SpeakerEmbedding a = cond.Speaker(e.speaker_id);
    const SpeakerEmbedding b = cond.Speaker(target);
    const Mat<T> ab = ConvertConditional(cond, x, a, b);
    r.round_trip = std::max(r.round_trip, MaxAbsDiff<T>(ConvertConditional(cond, ab, b, a), x));

    const SpeakerEmbedding t = expl.Speaker(target);
    const Mat<T> once = ConvertExplicit(expl, x, t);
    r.idempotence = std::max(r.idempotence, MaxAbsDiff<T>(ConvertExplicit(expl, once, t), once));
    const Segments seg = Segments::Single(x.rows());
    const auto zs = PartitionLatent<T>(expl.flow.Forward(x, seg, nullptr).z, expl.partition());
    const auto zc = PartitionLatent<T>(expl.flow.Forward(once, seg, nullptr).z, expl.partition());
    r.preserved = std::max({r.preserved, MaxAbsDiff<T>(zs[0], zc[0]), MaxAbsDiff<T>(zs[2], zc[2])});
  }
  return r;
}

// Judged in double precision on the trained weights; the single-precision
// figures are reported alongside.
Outcome ConversionIdentities(Trained& cond, Trained& expl,
                             const std::vector<TrainingExample>& test) {
  const IdentityErrors f = MeasureIdentities<float>(cond.model, expl.model, test);
  const GlowVcModel<double> cd = Widen(cond.model);
  const GlowVcModel<double> ed = Widen(expl.model);
  const IdentityErrors d = MeasureIdentities<double>(cd, ed, test);
  return {d.round_trip < 2e-4 && d.idempotence < 2e-4 && d.preserved < 1e-4,
          Format("double: A->B->A %.3g, idempotence %.3g, content/pitch latents %.3g",
                 d.round_trip, d.idempotence, d.preserved) +
              Format("; float: %.3g, %.3g, %.3g", f.round_trip, f.idempotence,
                     f.preserved)};
}

// ------------------------------------------------------------------------ 8

using ConditionalFn = Mat<float> (*)(const GlowVcModel<float>&, const Mat<float>&,
                                     const SpeakerEmbedding&, const SpeakerEmbedding&);
using ExplicitFn = Mat<float> (*)(const GlowVcModel<float>&, const Mat<float>&,
                                  const SpeakerEmbedding&, double, uint64_t);
static_assert(std::is_same_v<decltype(&ConvertConditional<float>), ConditionalFn>);
static_assert(std::is_same_v<decltype(&ConvertExplicit<float>), ExplicitFn>);
static_assert(!std::is_invocable_v<decltype(&ConvertExplicit<float>),
                                   const GlowVcModel<float>&, const ContentInput&,
                                   const SpeakerEmbedding&, double, uint64_t>);
static_assert(!std::is_invocable_v<decltype(&ConvertConditional<float>),
                                   const GlowVcModel<float>&, const NormalizedPitch&,
                                   const SpeakerEmbedding&, const SpeakerEmbedding&>);

Outcome TextFree(const Trained& cond, const Trained& expl,
                 const std::vector<TrainingExample>& test) {
  // Features only: no transcript, durations or pitch track reach the call.
  FeatureFile f;
  f.utterance_id = test[0].id;
  f.mel = test[0].mel;
  const FeatureFile bare = FeatureFileFromContainer(FeatureFileToContainer(f));
  const Mat<float> a = ConvertExplicit(expl.model, bare.mel, expl.model.Speaker(2));
  const Mat<float> b = ConvertConditional(cond.model, bare.mel, cond.model.Speaker(0),
                                          cond.model.Speaker(2));
  const bool ok = a.rows() == f.mel.rows() && b.rows() == f.mel.rows() &&
                  a.allFinite() && b.allFinite();
  return {ok, "conversion signatures take only features and speaker embeddings; "
              "feature-only conversions ran"};
}

// ------------------------------------------------------------------------ 9

Outcome FormatRoundTrips(Trained& expl, const std::vector<TrainingExample>& test) {
  bool ok = true;
  std::string detail;
  const OptimizerState<float> state = OptimizerState<float>::Zeros(expl.model.Params());
  const auto bytes = EncodeContainer(CheckpointToContainer(expl.model, &state));
  Checkpoint loaded = CheckpointFromContainer(DecodeContainer(bytes));
  const bool ckpt = EncodeContainer(CheckpointToContainer(loaded.model, &*loaded.optimizer)) == bytes;
  ok &= ckpt;

  FeatureFile f;
  f.utterance_id = test[1].id;
  f.speaker_id = test[1].speaker_id;
  f.language_id = test[1].content.language_id;
  f.mel = test[1].mel;
  f.f0_norm = test[1].pitch;
  const auto fbytes = EncodeContainer(FeatureFileToContainer(f));
  const FeatureFile g = FeatureFileFromContainer(DecodeContainer(fbytes));
  const bool feat = g.mel == f.mel && g.f0_norm == f.f0_norm &&
                    EncodeContainer(FeatureFileToContainer(g)) == fbytes;
  ok &= feat;

  auto bad_magic = fbytes;
  bad_magic[1] ^= 0xFF;
  auto version = fbytes;
  version[4] = 0x0F;
  version[5] = 0x27;
  const std::vector<uint8_t> truncated(fbytes.begin(), fbytes.end() - 7);
  std::string text(fbytes.begin(), fbytes.end());
  const std::string shape = "\"shape\":[" + std::to_string(f.mel.rows()) + ",80]";
  const size_t at = text.find(shape);
  std::string wrong = shape;
  wrong.replace(wrong.size() - 3, 2, "79");
  if (at != std::string::npos) text.replace(at, shape.size(), wrong);
  const std::vector<uint8_t> mismatch(text.begin(), text.end());
  const bool taxonomy =
      CodeOf([&] { DecodeContainer(bad_magic); }) == ErrorCode::kBadMagic &&
      CodeOf([&] { DecodeContainer(version); }) == ErrorCode::kVersionUnsupported &&
      CodeOf([&] { DecodeContainer(truncated); }) == ErrorCode::kCorruptIndex &&
      at != std::string::npos &&
      CodeOf([&] { DecodeContainer(mismatch); }) == ErrorCode::kShapeMismatch;
  ok &= taxonomy;
  detail = std::string("checkpoint bytes ") + (ckpt ? "identical" : "DIFFER") +
           ", feature file bytes " + (feat ? "identical" : "DIFFER") +
           ", error taxonomy " + (taxonomy ? "BadMagic/VersionUnsupported/CorruptIndex/ShapeMismatch" : "WRONG");
  return {ok, detail};
}

int Main() {
  int failed = 0;
  auto report = [&](int n, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d: %s %s [%.1f s]\n", n, o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), s);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  };

  report(1, Bijectivity);
  report(2, LogDetOracle);
  report(3, DensityNormalization);
  report(4, GradientOracle);

  const SyntheticCorpus corpus = GenerateCorpus(SynthConfig{});
  const std::vector<TrainingExample> train = ToTrainingExamples(corpus, false);
  const std::vector<TrainingExample> test = ToTrainingExamples(corpus, true);
  std::optional<Trained> cond, expl;
  report(5, [&] {
    cond.emplace(TrainVariant(Variant::kConditional, corpus, train));
    expl.emplace(TrainVariant(Variant::kExplicit, corpus, train));
    return TrainingProgress(*cond, *expl);
  });
  if (!cond || !expl) {
    for (int n : {6, 7, 8, 9})
      std::printf("criterion %d: FAIL training did not complete\n", n);
    return 1;
  }
  report(6, [&] { return ConversionIdentities(*cond, *expl, test); });
  report(7, [&] { return Disentanglement(*expl); });
  report(8, [&] { return TextFree(*cond, *expl, test); });
  report(9, [&] { return FormatRoundTrips(*expl, test); });
  std::printf("%s: %d of 9 criteria failed\n", failed ? "FAIL" : "PASS", failed);
  return failed ? 1 : 0;
}

}  // namespace
}  // namespace glowvc

int main() { return glowvc::Main(); }
