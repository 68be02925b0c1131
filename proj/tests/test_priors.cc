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


#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"

#include "glowvc/error.h"
#include "glowvc/priors.h"
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

ContentEncoderConfig SmallConfig() {
  ContentEncoderConfig cfg;
  cfg.phoneme_vocab = 6;
  cfg.n_languages = 2;
  cfg.phoneme_dim = 5;
  cfg.language_dim = 2;
  cfg.conv_layers = 2;
  cfg.conv_channels = 7;
  cfg.width = 4;
  return cfg;
}

TEST_CASE("upsample: rows repeat by duration") {
  Mat<float> p(3, 2);
  p << 1, 2, 3, 4, 5, 6;
  const std::vector<int> d = {2, 1, 3};
  const Mat<float> up = UpsampleByDuration<float>(p, d);
  REQUIRE(up.rows() == 6);
  const std::vector<float> first = {1, 1, 3, 5, 5, 5};
  for (Index r = 0; r < 6; ++r) CHECK(up(r, 0) == first[r]);
}

TEST_CASE("upsample: invalid durations") {
  Mat<float> p = Mat<float>::Ones(2, 1);
  const std::vector<int> zero = {1, 0};
  const std::vector<int> neg = {1, -2};
  const std::vector<int> short_d = {1};
  CHECK(CodeOf([&] { UpsampleByDuration<float>(p, zero); }) ==
        ErrorCode::kNonPositiveDuration);
  CHECK(CodeOf([&] { UpsampleByDuration<float>(p, neg); }) ==
        ErrorCode::kNonPositiveDuration);
  CHECK(CodeOf([&] { UpsampleByDuration<float>(p, short_d); }) ==
        ErrorCode::kShapeMismatch);
  CHECK(CodeOf([&] {
          UpsampleByDuration<float>(Mat<float>(0, 1), std::vector<int>{});
        }) == ErrorCode::kEmptyInput);
}

TEST_CASE("gaussian loglik: reference values") {
  CHECK(GaussianLoglik<double>(Mat<double>::Zero(1, 1), Mat<double>::Zero(1, 1)) ==
        doctest::Approx(-0.918939).epsilon(1e-6));
  CHECK(GaussianLoglik<float>(Mat<float>::Zero(1, 80), Mat<float>::Zero(1, 80)) ==
        doctest::Approx(-73.5151).epsilon(1e-6));
  Mat<double> z(1, 2);
  z << 1, -1;
  CHECK(GaussianLoglik<double>(z, Mat<double>::Zero(1, 2)) ==
        doctest::Approx(-2.837877).epsilon(1e-6));
  CHECK(CodeOf([] {
          GaussianLoglik<float>(Mat<float>::Zero(2, 1), Mat<float>::Zero(1, 1));
        }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("gaussian loglik: matches a direct density") {
  const Mat<double> z = RandomMat<double>(5, 3, 1);
  const Mat<double> mu = RandomMat<double>(5, 3, 2);
  double direct = 0.0;
  for (Index i = 0; i < z.size(); ++i) {
    const double d = z.data()[i] - mu.data()[i];
    direct += std::log(std::exp(-0.5 * d * d) / std::sqrt(2.0 * M_PI));
  }
  CHECK(GaussianLoglik(z, mu) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("pitch prior: the normalized track is the mean") {
  const std::vector<float> p = {0.5f, -1.0f, 2.0f};
  const auto stats = PitchPrior<float>(p);
  REQUIRE(stats.mu.rows() == 3);
  REQUIRE(stats.mu.cols() == 1);
  CHECK(stats.mu(1, 0) == -1.0f);
  CHECK(stats.sigma == 1.0);
}

TEST_CASE("content input: validation") {
  ContentInput in{{1, 2}, 0, {2, 3}};
  CHECK(in.TotalFrames() == 5);
  CHECK_NOTHROW(in.Validate(6, 2));
  CHECK(CodeOf([&] { in.Validate(2, 2); }) == ErrorCode::kVocabularyOverflow);
  ContentInput empty{{}, 0, {}};
  CHECK(CodeOf([&] { empty.Validate(6, 2); }) == ErrorCode::kEmptyInput);
  ContentInput zero{{1}, 0, {0}};
  CHECK(CodeOf([&] { zero.Validate(6, 2); }) == ErrorCode::kNonPositiveDuration);
  ContentInput mismatch{{1, 2}, 0, {1}};
  CHECK(CodeOf([&] { mismatch.Validate(6, 2); }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("content encoder: output shape and deterministic evaluation") {
  ContentEncoderConfig cfg;
  cfg.phoneme_vocab = 32;
  cfg.n_languages = 2;
  nn::Rng rng(3);
  ContentEncoder<float> enc(cfg, &rng);
  const ContentInput in{{3, 7}, 1, {1, 3}};
  const Mat<float> a = enc.Evaluate(in);
  CHECK(a.rows() == 4);
  CHECK(a.cols() == 40);
  CHECK(MaxAbsDiff(a, enc.Evaluate(in)) == 0.0);
}

TEST_CASE("content encoder: packed batch equals per-item evaluation") {
  nn::Rng rng(4);
  ContentEncoder<double> enc(SmallConfig(), &rng);
  const ContentInput a{{1, 2, 3}, 0, {2, 1, 2}};
  const ContentInput b{{5, 0}, 1, {3, 1}};
  const ContentInput* batch[] = {&a, &b};
  const Mat<double> joint = enc.Forward(batch, PassOptions{}, nullptr);
  REQUIRE(joint.rows() == 9);
  CHECK(MaxAbsDiff<double>(joint.topRows(5), enc.Evaluate(a)) < 1e-12);
  CHECK(MaxAbsDiff<double>(joint.bottomRows(4), enc.Evaluate(b)) < 1e-12);
}

TEST_CASE("content encoder: training-mode dropout depends on the seed") {
  nn::Rng rng(5);
  ContentEncoder<double> enc(SmallConfig(), &rng);
  const ContentInput a{{1, 2, 3, 4}, 0, {2, 1, 2, 2}};
  const ContentInput* batch[] = {&a};
  PassOptions opt;
  opt.training = true;
  opt.dropout_seed = 1;
  const Mat<double> x1 = enc.Forward(batch, opt, nullptr);
  const Mat<double> x1b = enc.Forward(batch, opt, nullptr);
  opt.dropout_seed = 2;
  const Mat<double> x2 = enc.Forward(batch, opt, nullptr);
  CHECK(MaxAbsDiff(x1, x1b) == 0.0);
  CHECK(MaxAbsDiff(x1, x2) > 0.0);
}

TEST_CASE("content encoder: memoryless setup permutes with the phonemes") {
  ContentEncoderConfig cfg = SmallConfig();
  cfg.conv_kernel = 1;
  nn::Rng rng(6);
  ContentEncoder<double> enc(cfg, &rng);
  // Zero recurrent weights and a strongly negative forget-gate bias (gate
  // order i, f, g, o) make every LSTM step depend on its own input only.
  for (nn::Lstm<double>* l : {&enc.lstm1.fwd, &enc.lstm1.bwd, &enc.lstm2.fwd,
                              &enc.lstm2.bwd}) {
    const Index h = l->hidden_size();
    l->w_recurrent.value.setZero();
    l->bias.value.middleCols(h, h).setConstant(-30.0);
  }
  const ContentInput in{{1, 4, 2}, 1, {2, 1, 3}};
  const ContentInput perm{{2, 1, 4}, 1, {3, 2, 1}};
  const Mat<double> a = enc.Evaluate(in);
  const Mat<double> b = enc.Evaluate(perm);
  CHECK(MaxAbsDiff<double>(a.middleRows(3, 3), b.topRows(3)) < 1e-12);
  CHECK(MaxAbsDiff<double>(a.topRows(2), b.middleRows(3, 2)) < 1e-12);
  CHECK(MaxAbsDiff<double>(a.middleRows(2, 1), b.bottomRows(1)) < 1e-12);
  // Each phoneme's frames are constant.
  CHECK(MaxAbsDiff<double>(a.row(0), a.row(1)) < 1e-12);
}

TEST_CASE("content encoder: language changes the output") {
  nn::Rng rng(7);
  ContentEncoder<float> enc(SmallConfig(), &rng);
  const ContentInput l0{{1, 2}, 0, {2, 2}};
  const ContentInput l1{{1, 2}, 1, {2, 2}};
  CHECK(MaxAbsDiff(enc.Evaluate(l0), enc.Evaluate(l1)) > 1e-6);
  const ContentInput bad{{1, 2}, 2, {2, 2}};
  CHECK(CodeOf([&] { enc.Evaluate(bad); }) == ErrorCode::kVocabularyOverflow);
}

TEST_CASE("speaker encoder: affine projection broadcast over frames") {
  nn::Rng rng(8);
  SpeakerEncoder<double> enc(3, 2, &rng);
  enc.proj.weight.value << 1, 0, 0, 1, 1, 1;
  enc.proj.bias.value << 0.5, -0.5;
  const SpeakerEmbedding s{{1.0f, 2.0f, 3.0f}};
  const PriorStats<double> p = enc.Prior(s, 4);
  REQUIRE(p.mu.rows() == 4);
  REQUIRE(p.mu.cols() == 2);
  for (Index t = 0; t < 4; ++t) {
    CHECK(p.mu(t, 0) == doctest::Approx(4.5));
    CHECK(p.mu(t, 1) == doctest::Approx(4.5));
  }
  CHECK(enc.width() == 2);
  const SpeakerEmbedding wrong{{1.0f, 2.0f}};
  CHECK(CodeOf([&] { enc.Prior(wrong, 4); }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("speaker encoder: different embeddings give different means") {
  nn::Rng rng(9);
  SpeakerEncoder<float> enc(kSpeakerEmbeddingDim, 39, &rng);
  const Mat<float> e = RandomMat<float>(2, kSpeakerEmbeddingDim, 10);
  const Mat<float> mu = enc.Forward(e);
  CHECK(mu.rows() == 2);
  CHECK(MaxAbsDiff<float>(mu.row(0), mu.row(1)) > 1e-3);
}

}  // namespace
}  // namespace glowvc
