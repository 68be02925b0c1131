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


#include <cmath>
#include <random>
#include <regex>
#include <vector>

#include "doctest.h"

#include "glowvc/error.h"
#include "glowvc/synthlab.h"
#include "test_util.h"

namespace glowvc {
namespace {

using testing::MaxAbsDiff;
using testing::RandomMat;

template <typename F>
ErrorCode CodeOf(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIo;
}

const SyntheticCorpus& Corpus() {
  static const SyntheticCorpus corpus = GenerateCorpus(SynthConfig{});
  return corpus;
}

SpeakerCentroids TrainCentroids(const SyntheticCorpus& c) {
  std::vector<LabelledFeatures> ref;
  for (const auto& u : c.utterances)
    if (!u.held_out) ref.push_back({&u.mel, u.speaker_id});
  return SpeakerCentroids::Fit(ref);
}

TEST_CASE("corpus: layout of the default corpus") {
  const auto& c = Corpus();
  REQUIRE(c.utterances.size() == 300);
  int held = 0;
  const std::regex id("spk\\d\\d_utt\\d{4}");
  for (const auto& u : c.utterances) {
    CHECK(std::regex_match(u.id, id));
    const Index frames = u.content.TotalFrames();
    CHECK(u.mel.rows() == frames);
    CHECK(u.mel.cols() == 80);
    CHECK(static_cast<Index>(u.pitch.values.size()) == frames);
    CHECK(u.content.phoneme_ids.size() >= 4);
    CHECK(u.content.phoneme_ids.size() <= 10);
    for (int d : u.content.durations) {
      CHECK(d >= 2);
      CHECK(d <= 5);
    }
    CHECK_NOTHROW(u.content.Validate(32, 2));
    held += u.held_out ? 1 : 0;
  }
  CHECK(held == 60);
  CHECK_FALSE(c.utterances[79].held_out);
  CHECK(c.utterances[80].held_out);
  CHECK(c.phoneme_symbols.size() == 32);
  CHECK(c.language_symbols.size() == 2);
}

TEST_CASE("corpus: generation is deterministic in the seed") {
  SynthConfig cfg;
  cfg.utterances_per_speaker = 5;
  const auto a = GenerateCorpus(cfg);
  const auto b = GenerateCorpus(cfg);
  cfg.seed = 43;
  const auto c = GenerateCorpus(cfg);
  CHECK(a.utterances[7].mel == b.utterances[7].mel);
  CHECK(a.factors.mixing == b.factors.mixing);
  CHECK(a.factors.mixing != c.factors.mixing);
}

TEST_CASE("factors: speakers are separated and the mixing is well conditioned") {
  const auto& f = Corpus().factors;
  for (Index i = 0; i < f.speaker_vectors.rows(); ++i)
    for (Index j = i + 1; j < f.speaker_vectors.rows(); ++j)
      CHECK((f.speaker_vectors.row(i) - f.speaker_vectors.row(j)).norm() >= 1.0);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(f.mixing);
  CHECK(svd.singularValues().maxCoeff() <= 1.5);
  CHECK(svd.singularValues().minCoeff() >= 0.5);
}

TEST_CASE("factors: unmixing recovers the planted latent") {
  const auto& c = Corpus();
  const auto& u = c.utterances[3];
  const Mat<double> latent = c.factors.Unmix(u.mel);
  const RowVec<double> spk = latent.middleCols(40, 39).colwise().mean();
  CHECK((spk - c.factors.speaker_vectors.row(u.speaker_id)).cwiseAbs().maxCoeff() < 0.1);
  for (Index t = 0; t < latent.rows(); ++t)
    CHECK(std::abs(latent(t, 79) - u.pitch.values[t]) < 0.4);
  const RowVec<double> expected = c.factors.phoneme_vectors.row(u.content.phoneme_ids[0]) +
                                  c.factors.language_vectors.row(u.content.language_id);
  CHECK((latent.row(0).leftCols(40) - expected).cwiseAbs().maxCoeff() < 0.5);
}

TEST_CASE("factors: identity mixing leaves the latent in the features") {
  SynthConfig cfg;
  cfg.identity_mixing = true;
  cfg.noise_std = 0.0;
  cfg.utterances_per_speaker = 2;
  const auto c = GenerateCorpus(cfg);
  const auto& u = c.utterances[2];
  CHECK(MaxAbsDiff<double>(c.factors.Unmix(u.mel), u.mel.cast<double>()) < 1e-12);
  for (Index t = 0; t < u.mel.rows(); ++t)
    CHECK(u.mel(t, 40) == static_cast<float>(c.factors.speaker_vectors(u.speaker_id, 0)));
}

TEST_CASE("metrics: real held-out speech is classified by its speaker") {
  const auto& c = Corpus();
  const SpeakerCentroids centroids = TrainCentroids(c);
  std::vector<LabelledFeatures> real, wrong, random_targets;
  std::mt19937_64 rng(1);
  for (const auto& u : c.utterances) {
    if (!u.held_out) continue;
    real.push_back({&u.mel, u.speaker_id});
    wrong.push_back({&u.mel, (u.speaker_id + 1) % 3});
    random_targets.push_back({&u.mel, static_cast<int>(rng() % 3)});
  }
  CHECK(SpeakerTransferAccuracy(real, centroids) == 1.0);
  CHECK(SpeakerTransferAccuracy(wrong, centroids) == 0.0);
  const double chance = SpeakerTransferAccuracy(random_targets, centroids);
  CHECK(chance > 0.15);
  CHECK(chance < 0.55);
}

TEST_CASE("metrics: an oracle conversion scores perfectly") {
  const auto& c = Corpus();
  const SpeakerCentroids centroids = TrainCentroids(c);
  std::vector<SynthUtterance> sources, converted;
  std::vector<const Mat<float>*> src, out;
  std::vector<LabelledFeatures> labelled;
  // Re-rendering with the same seed under another speaker keeps the content
  // noise and the pitch contour.
  for (size_t k = 0; k < c.utterances.size(); k += 7) {
    const auto& u = c.utterances[k];
    const uint64_t seed = 99 + k;
    sources.push_back(SynthesizeUtterance(c.factors, c.config, u.speaker_id, u.content, seed));
    converted.push_back(SynthesizeUtterance(c.factors, c.config,
                                            (u.speaker_id + 1) % 3, u.content, seed));
  }
  for (size_t i = 0; i < sources.size(); ++i) {
    src.push_back(&sources[i].mel);
    out.push_back(&converted[i].mel);
    labelled.push_back({&converted[i].mel, converted[i].speaker_id});
  }
  CHECK(SpeakerTransferAccuracy(labelled, centroids) == 1.0);
  CHECK(ContentPreservationScore(src, out, c.factors) > 0.99);
  CHECK(ContentPreservationScore(src, src, c.factors) == doctest::Approx(1.0));
}

TEST_CASE("metrics: content score ignores rescaled non-content channels") {
  SynthConfig cfg;
  cfg.identity_mixing = true;
  cfg.utterances_per_speaker = 4;
  const auto c = GenerateCorpus(cfg);
  std::vector<Mat<float>> scaled;
  for (const auto& u : c.utterances) {
    Mat<float> m = u.mel;
    m.rightCols(40) = (m.rightCols(40).array() * 3.0f + 2.0f).matrix();
    scaled.push_back(m);
  }
  std::vector<const Mat<float>*> src, out;
  for (size_t i = 0; i < scaled.size(); ++i) {
    src.push_back(&c.utterances[i].mel);
    out.push_back(&scaled[i]);
  }
  CHECK(ContentPreservationScore(src, out, c.factors) == doctest::Approx(1.0));
}

TEST_CASE("metrics: unrelated content scores near zero") {
  const auto& c = Corpus();
  std::vector<Mat<float>> noise;
  std::vector<const Mat<float>*> src, out;
  for (int i = 0; i < 20; ++i) {
    const auto& u = c.utterances[240 + i];
    noise.push_back(RandomMat<float>(u.mel.rows(), 80, 10 + i));
  }
  for (int i = 0; i < 20; ++i) {
    src.push_back(&c.utterances[240 + i].mel);
    out.push_back(&noise[i]);
  }
  CHECK(std::abs(ContentPreservationScore(src, out, c.factors)) < 0.1);
}

TEST_CASE("metrics: error cases") {
  const auto& c = Corpus();
  const Mat<float> a = RandomMat<float>(5, 80, 1);
  const Mat<float> b = RandomMat<float>(6, 80, 2);
  const Mat<float>* sa[] = {&a};
  const Mat<float>* sb[] = {&b};
  CHECK(CodeOf([&] { ContentPreservationScore(sa, sb, c.factors); }) ==
        ErrorCode::kLengthMismatch);
  const Mat<float>* two[] = {&a, &a};
  CHECK(CodeOf([&] { ContentPreservationScore(sa, two, c.factors); }) ==
        ErrorCode::kLengthMismatch);
  const SpeakerCentroids centroids = TrainCentroids(c);
  CHECK(CodeOf([&] {
          SpeakerTransferAccuracy(std::span<const LabelledFeatures>(), centroids);
        }) == ErrorCode::kInsufficientData);
}

TEST_CASE("config: invalid generator settings") {
  SynthConfig cfg;
  cfg.n_speakers = 1;
  CHECK(CodeOf([&] { GenerateCorpus(cfg); }) == ErrorCode::kBadConfig);
  cfg = SynthConfig{};
  cfg.speaker_dim = 30;
  CHECK(CodeOf([&] { GenerateCorpus(cfg); }) == ErrorCode::kBadConfig);
  cfg = SynthConfig{};
  cfg.held_out_fraction = 1.0;
  CHECK(CodeOf([&] { GenerateCorpus(cfg); }) == ErrorCode::kBadConfig);
  cfg = SynthConfig{};
  cfg.min_duration = 0;
  CHECK(CodeOf([&] { GenerateCorpus(cfg); }) == ErrorCode::kBadConfig);
}

TEST_CASE("baseline: diagonal Gaussian fit and bits per dim") {
  const Mat<float> x = RandomMat<float>(4000, 80, 3, 2.0);
  const Mat<float>* data[] = {&x};
  const DiagonalGaussian g = DiagonalGaussian::Fit(data);
  CHECK(std::abs(g.var.mean() - 4.0) < 0.1);
  CHECK(std::abs(g.mean.mean()) < 0.05);
  // Expected nll per dim of a fitted Gaussian is 0.5 * log(2 pi e var).
  const double expected = 0.5 * std::log(2.0 * M_PI * M_E * 4.0) / std::log(2.0);
  CHECK(g.BitsPerDim(data) == doctest::Approx(expected).epsilon(0.01));

  DiagonalGaussian unit;
  unit.mean = RowVec<double>::Zero(80);
  unit.var = RowVec<double>::Ones(80);
  CHECK(unit.Nll(Mat<float>::Zero(1, 80)) == doctest::Approx(80.0 * kHalfLog2Pi));
  CHECK(CodeOf([] { BitsPerDim(1.0, 0); }) == ErrorCode::kEmptyInput);
}

TEST_CASE("random examples: shapes follow the model config") {
  const ModelConfig cfg = ModelConfig::Tiny(Variant::kExplicit);
  const Index lengths[] = {3, 7};
  const auto ex = RandomTrainingExamples(cfg, lengths, 5);
  REQUIRE(ex.size() == 2);
  CHECK(ex[1].mel.rows() == 7);
  CHECK(ex[1].mel.cols() == 4);
  CHECK(ex[1].content.TotalFrames() == 7);
  CHECK(ex[1].pitch.size() == 7);
  CHECK_NOTHROW(ex[0].content.Validate(cfg.phoneme_vocab, cfg.n_languages));
}

}  // namespace
}  // namespace glowvc
