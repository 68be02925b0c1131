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


#include "glowvc/synthlab.h"

#include <cmath>
#include <numbers>
#include <random>

#include "glowvc/error.h"

namespace glowvc {

namespace {

using Rng = std::mt19937_64;

Mat<double> Gaussian(Index rows, Index cols, double scale, Rng* rng) {
  std::normal_distribution<double> dist(0.0, scale);
  Mat<double> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(*rng);
  return m;
}

Eigen::MatrixXd RandomOrthogonal(Index n, Rng* rng) {
  const Eigen::MatrixXd g = Gaussian(n, n, 1.0, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  // Sign-fix so the draw is Haar distributed.
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

double MinPairwiseDistance(const Mat<double>& v) {
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < v.rows(); ++i)
    for (Index j = i + 1; j < v.rows(); ++j)
      best = std::min(best, (v.row(i) - v.row(j)).norm());
  return best;
}

RowVec<double> TimeAverage(const Mat<float>& x) {
  return x.template cast<double>().colwise().mean();
}

}  // namespace

void SynthConfig::Validate() const {
  Require(n_speakers >= 2, ErrorCode::kBadConfig, "n_speakers must be >= 2");
  Require(n_languages >= 1, ErrorCode::kBadConfig, "n_languages must be >= 1");
  Require(utterances_per_speaker >= 1, ErrorCode::kBadConfig,
          "utterances_per_speaker must be >= 1");
  Require(phoneme_vocab_size >= 2, ErrorCode::kBadConfig,
          "phoneme_vocab_size must be >= 2");
  Require(min_phonemes >= 1 && max_phonemes >= min_phonemes,
          ErrorCode::kBadConfig, "phoneme count range");
  Require(min_duration >= 1 && max_duration >= min_duration,
          ErrorCode::kBadConfig, "duration range");
  Require(content_dim >= 1 && speaker_dim >= 1 &&
              content_dim + speaker_dim + 1 == n_mels,
          ErrorCode::kBadConfig,
          "content_dim + speaker_dim + 1 must equal n_mels");
  Require(noise_std >= 0.0 && content_noise_std >= 0.0 && language_scale >= 0.0,
          ErrorCode::kBadConfig, "noise scales must be >= 0");
  Require(min_speaker_distance >= 0.0, ErrorCode::kBadConfig,
          "min_speaker_distance must be >= 0");
  Require(held_out_fraction >= 0.0 && held_out_fraction < 1.0,
          ErrorCode::kBadConfig, "held_out_fraction must be in [0, 1)");
}

Mat<double> GeneratorFactors::Unmix(const Mat<float>& features) const {
  Require(features.cols() == mixing.rows(), ErrorCode::kShapeMismatch,
          "feature width does not match the mixing map");
  const Mat<double> centered =
      features.template cast<double>().rowwise() - bias.row(0);
  // u M = x - b  <=>  M^T u^T = (x - b)^T
  const Eigen::MatrixXd sol =
      mixing.transpose().partialPivLu().solve(centered.transpose());
  return sol.transpose();
}

GeneratorFactors DrawFactors(const SynthConfig& cfg) {
  cfg.Validate();
  Rng rng(cfg.seed);
  GeneratorFactors f;
  bool separated = false;
  for (int attempt = 0; attempt < 1000 && !separated; ++attempt) {
    f.speaker_vectors = Gaussian(cfg.n_speakers, cfg.speaker_dim, 1.0, &rng);
    separated = MinPairwiseDistance(f.speaker_vectors) >= cfg.min_speaker_distance;
  }
  Require(separated, ErrorCode::kBadConfig,
          "could not separate speaker vectors by min_speaker_distance");
  f.phoneme_vectors = Gaussian(cfg.phoneme_vocab_size, cfg.content_dim, 1.0, &rng);
  f.language_vectors =
      Gaussian(cfg.n_languages, cfg.content_dim, cfg.language_scale, &rng);
  if (cfg.identity_mixing) {
    f.mixing = Mat<double>::Identity(cfg.n_mels, cfg.n_mels);
    f.bias = Mat<double>::Zero(1, cfg.n_mels);
  } else {
    const Eigen::MatrixXd q1 = RandomOrthogonal(cfg.n_mels, &rng);
    const Eigen::MatrixXd q2 = RandomOrthogonal(cfg.n_mels, &rng);
    std::uniform_real_distribution<double> gain(0.5, 1.5);
    Eigen::VectorXd s(cfg.n_mels);
    for (Index i = 0; i < cfg.n_mels; ++i) s(i) = gain(rng);
    f.mixing = q1 * s.asDiagonal() * q2.transpose();
    f.bias = Gaussian(1, cfg.n_mels, 1.0, &rng);
  }
  return f;
}

SynthUtterance SynthesizeUtterance(const GeneratorFactors& factors,
                                   const SynthConfig& cfg, int speaker_id,
                                   const ContentInput& content, uint64_t seed) {
  content.Validate(cfg.phoneme_vocab_size, cfg.n_languages);
  Require(speaker_id >= 0 && speaker_id < factors.speaker_vectors.rows(),
          ErrorCode::kVocabularyOverflow, "speaker id");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Index frames = content.TotalFrames();
  const Index cd = cfg.content_dim;
  const Index sd = cfg.speaker_dim;

  SynthUtterance u;
  u.speaker_id = speaker_id;
  u.content = content;

  const double cycles = 0.5 + 1.5 * unit(rng);
  const double phase = 2.0 * std::numbers::pi * unit(rng);
  u.pitch_track.f0_hz.resize(static_cast<size_t>(frames));
  u.pitch_track.voiced.assign(static_cast<size_t>(frames), true);
  for (Index t = 0; t < frames; ++t) {
    const double contour =
        std::sin(2.0 * std::numbers::pi * cycles * static_cast<double>(t) /
                     static_cast<double>(frames) + phase) +
        0.1 * normal(rng);
    u.pitch_track.f0_hz[t] = static_cast<float>(150.0 * std::exp(0.15 * contour));
  }
  u.pitch = NormalizeF0(u.pitch_track);

  Mat<double> latent(frames, cfg.n_mels);
  Index row = 0;
  for (size_t i = 0; i < content.phoneme_ids.size(); ++i) {
    const RowVec<double> base =
        factors.phoneme_vectors.row(content.phoneme_ids[i]) +
        factors.language_vectors.row(content.language_id);
    for (int d = 0; d < content.durations[i]; ++d, ++row) {
      for (Index c = 0; c < cd; ++c)
        latent(row, c) = base(c) + cfg.content_noise_std * normal(rng);
      latent.block(row, cd, 1, sd) = factors.speaker_vectors.row(speaker_id);
      latent(row, cd + sd) = u.pitch.values[row];
    }
  }
  Mat<double> x = latent * factors.mixing;
  x.rowwise() += factors.bias.row(0);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] += cfg.noise_std * normal(rng);
  u.mel = x.cast<float>();
  return u;
}

SyntheticCorpus GenerateCorpus(const SynthConfig& cfg) {
  SyntheticCorpus corpus;
  corpus.config = cfg;
  corpus.factors = DrawFactors(cfg);
  for (int p = 0; p < cfg.phoneme_vocab_size; ++p)
    corpus.phoneme_symbols.push_back("p" + std::to_string(p));
  for (int l = 0; l < cfg.n_languages; ++l)
    corpus.language_symbols.push_back("lang" + std::to_string(l));

  Rng layout(cfg.seed ^ 0x5DEECE66DULL);
  std::uniform_int_distribution<int> n_phon(cfg.min_phonemes, cfg.max_phonemes);
  std::uniform_int_distribution<int> phon(0, cfg.phoneme_vocab_size - 1);
  std::uniform_int_distribution<int> dur(cfg.min_duration, cfg.max_duration);
  std::uniform_int_distribution<int> lang(0, cfg.n_languages - 1);
  const int held_per_speaker = static_cast<int>(
      std::round(cfg.held_out_fraction * cfg.utterances_per_speaker));
  for (int s = 0; s < cfg.n_speakers; ++s) {
    for (int k = 0; k < cfg.utterances_per_speaker; ++k) {
      ContentInput content;
      content.language_id = lang(layout);
      const int length = n_phon(layout);
      for (int i = 0; i < length; ++i) {
        content.phoneme_ids.push_back(phon(layout));
        content.durations.push_back(dur(layout));
      }
      const uint64_t utt_seed =
          cfg.seed * 1000003ULL +
          static_cast<uint64_t>(s * cfg.utterances_per_speaker + k) + 1;
      SynthUtterance u =
          SynthesizeUtterance(corpus.factors, cfg, s, content, utt_seed);
      char id[32];
      std::snprintf(id, sizeof(id), "spk%02d_utt%04d", s, k);
      u.id = id;
      u.held_out = k >= cfg.utterances_per_speaker - held_per_speaker;
      corpus.utterances.push_back(std::move(u));
    }
  }
  return corpus;
}

SpeakerCentroids SpeakerCentroids::Fit(
    std::span<const LabelledFeatures> reference) {
  Require(!reference.empty(), ErrorCode::kInsufficientData, "no reference data");
  int n_speakers = 0;
  for (const auto& r : reference) n_speakers = std::max(n_speakers, r.target_speaker + 1);
  Require(n_speakers >= 2, ErrorCode::kInsufficientData,
          "need at least two speakers");
  const Index dims = reference.front().features->cols();
  SpeakerCentroids out;
  out.centroids = Mat<double>::Zero(n_speakers, dims);
  std::vector<int> counts(static_cast<size_t>(n_speakers), 0);
  for (const auto& r : reference) {
    Require(r.features->cols() == dims && r.features->rows() > 0,
            ErrorCode::kShapeMismatch, "reference feature shape");
    out.centroids.row(r.target_speaker) += TimeAverage(*r.features);
    ++counts[r.target_speaker];
  }
  for (int s = 0; s < n_speakers; ++s) {
    Require(counts[s] > 0, ErrorCode::kInsufficientData,
            "no reference utterances for speaker " + std::to_string(s));
    out.centroids.row(s) /= static_cast<double>(counts[s]);
  }
  return out;
}

int SpeakerCentroids::Classify(const Mat<float>& features) const {
  Require(features.cols() == centroids.cols(), ErrorCode::kShapeMismatch,
          "feature width does not match the centroids");
  const RowVec<double> avg = TimeAverage(features);
  Index best = 0;
  (centroids.rowwise() - avg).rowwise().squaredNorm().minCoeff(&best);
  return static_cast<int>(best);
}

double SpeakerTransferAccuracy(std::span<const LabelledFeatures> converted,
                               const SpeakerCentroids& centroids) {
  Require(centroids.centroids.rows() >= 2, ErrorCode::kInsufficientData,
          "need at least two speakers");
  Require(!converted.empty(), ErrorCode::kInsufficientData,
          "no converted utterances");
  int hits = 0;
  for (const auto& c : converted)
    if (centroids.Classify(*c.features) == c.target_speaker) ++hits;
  return static_cast<double>(hits) / static_cast<double>(converted.size());
}

double ContentPreservationScore(std::span<const Mat<float>* const> sources,
                                std::span<const Mat<float>* const> converted,
                                const GeneratorFactors& factors) {
  Require(sources.size() == converted.size(), ErrorCode::kLengthMismatch,
          "source and converted sets differ in size");
  Require(!sources.empty(), ErrorCode::kInsufficientData, "no pairs");
  const Index cd = factors.content_dim();
  double total = 0.0;
  for (size_t i = 0; i < sources.size(); ++i) {
    Require(sources[i]->rows() == converted[i]->rows(),
            ErrorCode::kLengthMismatch,
            "pair " + std::to_string(i) + " differs in frame count");
    const Mat<double> a = factors.Unmix(*sources[i]).leftCols(cd);
    const Mat<double> b = factors.Unmix(*converted[i]).leftCols(cd);
    const Eigen::ArrayXd va =
        Eigen::Map<const Eigen::VectorXd>(a.data(), a.size()).array() - a.mean();
    const Eigen::ArrayXd vb =
        Eigen::Map<const Eigen::VectorXd>(b.data(), b.size()).array() - b.mean();
    const double denom =
        std::sqrt(va.square().sum()) * std::sqrt(vb.square().sum());
    total += denom > 0.0 ? (va * vb).sum() / denom : 0.0;
  }
  return total / static_cast<double>(sources.size());
}

std::vector<TrainingExample> RandomTrainingExamples(
    const ModelConfig& cfg, std::span<const Index> lengths, uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> phoneme(0, static_cast<int>(cfg.phoneme_vocab) - 1);
  std::uniform_int_distribution<int> language(0, static_cast<int>(cfg.n_languages) - 1);
  std::uniform_int_distribution<int> speaker(0, static_cast<int>(cfg.n_speakers) - 1);
  std::vector<TrainingExample> out;
  for (size_t k = 0; k < lengths.size(); ++k) {
    const Index len = lengths[k];
    Require(len >= 1, ErrorCode::kEmptyInput, "example length must be >= 1");
    TrainingExample e;
    e.id = "random" + std::to_string(k);
    e.mel = Gaussian(len, cfg.n_mels, 1.0, &rng).cast<float>();
    e.content.language_id = language(rng);
    // Phonemes of one or two frames until the length is covered.
    for (Index covered = 0; covered < len;) {
      const int d = static_cast<int>(std::min<Index>(1 + rng() % 2, len - covered));
      e.content.phoneme_ids.push_back(phoneme(rng));
      e.content.durations.push_back(d);
      covered += d;
    }
    for (Index t = 0; t < len; ++t) e.pitch.push_back(static_cast<float>(normal(rng)));
    e.speaker_id = speaker(rng);
    out.push_back(std::move(e));
  }
  return out;
}

double BitsPerDim(double nll, Index frames, Index dims) {
  Require(frames >= 1 && dims >= 1, ErrorCode::kEmptyInput,
          "bits per dim needs at least one frame");
  return nll / (static_cast<double>(frames) * static_cast<double>(dims) *
                std::numbers::ln2);
}

DiagonalGaussian DiagonalGaussian::Fit(std::span<const Mat<float>* const> data) {
  Require(!data.empty(), ErrorCode::kInsufficientData, "no data");
  const Index dims = data.front()->cols();
  RowVec<double> sum = RowVec<double>::Zero(dims);
  RowVec<double> sq = RowVec<double>::Zero(dims);
  Index n = 0;
  for (const Mat<float>* x : data) {
    Require(x->cols() == dims, ErrorCode::kShapeMismatch, "feature width");
    const Mat<double> xd = x->cast<double>();
    sum += xd.colwise().sum();
    n += xd.rows();
  }
  Require(n >= 2, ErrorCode::kInsufficientData, "need at least two frames");
  DiagonalGaussian g;
  g.mean = sum / static_cast<double>(n);
  for (const Mat<float>* x : data)
    sq += (x->cast<double>().rowwise() - g.mean).array().square().matrix().colwise().sum();
  g.var = sq / static_cast<double>(n);
  return g;
}

double DiagonalGaussian::Nll(const Mat<float>& x) const {
  Require(x.cols() == mean.cols(), ErrorCode::kShapeMismatch, "feature width");
  const Eigen::ArrayXXd diff =
      (x.cast<double>().rowwise() - mean).array();
  const Eigen::ArrayXd inv = var.array().inverse().transpose();
  double nll = 0.0;
  for (Index t = 0; t < diff.rows(); ++t)
    nll += 0.5 * (diff.row(t).transpose().square() * inv).sum();
  nll += static_cast<double>(x.rows()) *
         (0.5 * (2.0 * std::numbers::pi * var.array()).log().sum());
  return nll;
}

double DiagonalGaussian::BitsPerDim(
    std::span<const Mat<float>* const> data) const {
  double nll = 0.0;
  Index frames = 0;
  for (const Mat<float>* x : data) {
    nll += Nll(*x);
    frames += x->rows();
  }
  return glowvc::BitsPerDim(nll, frames, mean.cols());
}

}  // namespace glowvc
