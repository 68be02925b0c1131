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


#include "glowvc/priors.h"

#include <cmath>
#include <numeric>

#include "glowvc/error.h"

namespace glowvc {

Index ContentInput::TotalFrames() const {
  Index total = 0;
  for (int d : durations) total += d;
  return total;
}

void ContentInput::Validate(Index phoneme_vocab, Index n_languages) const {
  Require(!phoneme_ids.empty(), ErrorCode::kEmptyInput, "no phonemes");
  Require(phoneme_ids.size() == durations.size(), ErrorCode::kShapeMismatch,
          "phoneme and duration counts differ");
  for (int d : durations)
    Require(d >= 1, ErrorCode::kNonPositiveDuration,
            "duration " + std::to_string(d));
  for (int id : phoneme_ids)
    Require(id >= 0 && id < phoneme_vocab, ErrorCode::kVocabularyOverflow,
            "phoneme id " + std::to_string(id));
  Require(language_id >= 0 && language_id < n_languages,
          ErrorCode::kVocabularyOverflow,
          "language id " + std::to_string(language_id));
}

template <typename T>
Mat<T> UpsampleByDuration(const Mat<T>& per_phoneme,
                          std::span<const int> durations) {
  Require(per_phoneme.rows() >= 1, ErrorCode::kEmptyInput,
          "no rows to upsample");
  Require(per_phoneme.rows() == static_cast<Index>(durations.size()),
          ErrorCode::kShapeMismatch, "one duration per row required");
  Index total = 0;
  for (int d : durations) {
    Require(d >= 1, ErrorCode::kNonPositiveDuration,
            "duration " + std::to_string(d));
    total += d;
  }
  Mat<T> out(total, per_phoneme.cols());
  Index row = 0;
  for (size_t i = 0; i < durations.size(); ++i)
    for (int k = 0; k < durations[i]; ++k)
      out.row(row++) = per_phoneme.row(static_cast<Index>(i));
  return out;
}

template <typename T>
double GaussianLoglik(const Mat<T>& z, const Mat<T>& mu) {
  Require(z.rows() == mu.rows() && z.cols() == mu.cols(),
          ErrorCode::kShapeMismatch, "latent block and prior mean shapes");
  double sq = 0.0;
  for (Index i = 0; i < z.size(); ++i) {
    const double d =
        static_cast<double>(z.data()[i]) - static_cast<double>(mu.data()[i]);
    sq += d * d;
  }
  return -kHalfLog2Pi * static_cast<double>(z.size()) - 0.5 * sq;
}

template <typename T>
PriorStats<T> PitchPrior(std::span<const float> normalized_pitch) {
  PriorStats<T> stats;
  stats.mu.resize(static_cast<Index>(normalized_pitch.size()), 1);
  for (size_t i = 0; i < normalized_pitch.size(); ++i)
    stats.mu(static_cast<Index>(i), 0) = static_cast<T>(normalized_pitch[i]);
  return stats;
}

// -------------------------------------------------------- ContentEncoder

template <typename T>
ContentEncoder<T>::ContentEncoder(const ContentEncoderConfig& cfg, nn::Rng* rng)
    : phoneme_embedding(cfg.phoneme_vocab, cfg.phoneme_dim, rng),
      language_embedding(cfg.n_languages, cfg.language_dim, rng),
      cfg_(cfg) {
  Require(cfg.width >= 1 && cfg.conv_layers >= 0 && cfg.conv_channels >= 1,
          ErrorCode::kBadConfig, "content encoder sizes");
  Index in = cfg.phoneme_dim + cfg.language_dim;
  for (Index l = 0; l < cfg.conv_layers; ++l) {
    convs.emplace_back(in, cfg.conv_channels, cfg.conv_kernel, rng);
    norms.emplace_back(cfg.conv_channels);
    in = cfg.conv_channels;
  }
  lstm1 = nn::BiLstm<T>(in, cfg.width, nn::BiMerge::kConcat, rng);
  lstm2 = nn::BiLstm<T>(2 * cfg.width, cfg.width, nn::BiMerge::kSum, rng);
}

template <typename T>
Mat<T> ContentEncoder<T>::Run(std::span<const ContentInput* const> batch,
                              const PassOptions& opt, Cache* cache) const {
  Require(!batch.empty(), ErrorCode::kEmptyInput, "empty content batch");
  std::vector<int> phonemes, languages;
  std::vector<Index> plen, flen, frame_source;
  for (const ContentInput* in : batch) {
    in->Validate(cfg_.phoneme_vocab, cfg_.n_languages);
    const Index base = static_cast<Index>(phonemes.size());
    for (size_t i = 0; i < in->phoneme_ids.size(); ++i) {
      phonemes.push_back(in->phoneme_ids[i]);
      languages.push_back(in->language_id);
      for (int k = 0; k < in->durations[i]; ++k)
        frame_source.push_back(base + static_cast<Index>(i));
    }
    plen.push_back(static_cast<Index>(in->phoneme_ids.size()));
    flen.push_back(in->TotalFrames());
  }
  const Segments pseg = Segments::FromLengths(plen);
  const Segments fseg = Segments::FromLengths(flen);

  const Index rows = static_cast<Index>(phonemes.size());
  Mat<T> h(rows, cfg_.phoneme_dim + cfg_.language_dim);
  h.leftCols(cfg_.phoneme_dim) = phoneme_embedding.Forward(phonemes);
  h.rightCols(cfg_.language_dim) = language_embedding.Forward(languages);

  const bool drop = opt.training && cfg_.dropout > 0.0;
  nn::Rng rng(opt.dropout_seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - cfg_.dropout));
  if (cache != nullptr) {
    cache->conv.assign(convs.size(), {});
    cache->norm.assign(norms.size(), {});
    cache->normalized_out.clear();
    cache->dropout_mask.clear();
  }
  for (size_t l = 0; l < convs.size(); ++l) {
    Mat<T> c = convs[l].Forward(h, pseg, cache ? &cache->conv[l] : nullptr);
    Mat<T> n = norms[l].Forward(c, opt.training, cache ? &cache->norm[l] : nullptr);
    h = n.cwiseMax(T(0));
    Mat<T> mask;
    if (drop) {
      mask.resize(h.rows(), h.cols());
      for (Index i = 0; i < mask.size(); ++i)
        mask.data()[i] = unif(rng) < cfg_.dropout ? T(0) : keep_scale;
      h.array() *= mask.array();
    }
    if (cache != nullptr) {
      cache->normalized_out.push_back(std::move(n));
      cache->dropout_mask.push_back(std::move(mask));
    }
  }
  const Mat<T> u1 = lstm1.Forward(h, pseg, cache ? &cache->lstm1 : nullptr);
  Mat<T> up(static_cast<Index>(frame_source.size()), u1.cols());
  for (size_t r = 0; r < frame_source.size(); ++r)
    up.row(static_cast<Index>(r)) = u1.row(frame_source[r]);
  Mat<T> mu = lstm2.Forward(up, fseg, cache ? &cache->lstm2 : nullptr);
  if (cache != nullptr) {
    cache->phonemes = std::move(phonemes);
    cache->languages = std::move(languages);
    cache->phoneme_segments = pseg;
    cache->frame_segments = fseg;
    cache->frame_source = std::move(frame_source);
  }
  return mu;
}

template <typename T>
Mat<T> ContentEncoder<T>::Forward(std::span<const ContentInput* const> batch,
                                  const PassOptions& opt, Cache* cache) {
  Cache local;
  Cache* c = cache;
  if (c == nullptr && opt.training && opt.update_running_stats) c = &local;
  Mat<T> mu = Run(batch, opt, c);
  if (opt.training && opt.update_running_stats)
    for (size_t l = 0; l < norms.size(); ++l)
      norms[l].UpdateRunningStats(c->norm[l]);
  return mu;
}

template <typename T>
Mat<T> ContentEncoder<T>::Evaluate(const ContentInput& input) const {
  const ContentInput* one[] = {&input};
  return Run(one, PassOptions{}, nullptr);
}

template <typename T>
void ContentEncoder<T>::Backward(const Mat<T>& dmu, const Cache& cache) {
  const Mat<T> dup = lstm2.Backward(dmu, cache.lstm2);
  Mat<T> du1 = Mat<T>::Zero(cache.phoneme_segments.total(), dup.cols());
  for (size_t r = 0; r < cache.frame_source.size(); ++r)
    du1.row(cache.frame_source[r]) += dup.row(static_cast<Index>(r));
  Mat<T> dh = lstm1.Backward(du1, cache.lstm1);
  for (size_t l = convs.size(); l-- > 0;) {
    if (cache.dropout_mask[l].size() > 0) dh.array() *= cache.dropout_mask[l].array();
    dh = (cache.normalized_out[l].array() > T(0)).select(dh, T(0));
    dh = norms[l].Backward(dh, cache.norm[l]);
    dh = convs[l].Backward(dh, cache.conv[l]);
  }
  phoneme_embedding.Backward(dh.leftCols(cfg_.phoneme_dim), cache.phonemes);
  language_embedding.Backward(dh.rightCols(cfg_.language_dim), cache.languages);
}

template <typename T>
void ContentEncoder<T>::Collect(const std::string& prefix, ParamList<T>* params,
                                BufferList<T>* buffers) {
  phoneme_embedding.Collect(prefix + ".phoneme_embedding", params);
  language_embedding.Collect(prefix + ".language_embedding", params);
  for (size_t l = 0; l < convs.size(); ++l) {
    convs[l].Collect(prefix + ".conv" + std::to_string(l), params);
    norms[l].Collect(prefix + ".norm" + std::to_string(l), params, buffers);
  }
  lstm1.Collect(prefix + ".lstm1", params);
  lstm2.Collect(prefix + ".lstm2", params);
}

// -------------------------------------------------------- SpeakerEncoder

template <typename T>
SpeakerEncoder<T>::SpeakerEncoder(Index embedding_dim, Index width,
                                  nn::Rng* rng)
    : proj(embedding_dim, width, rng) {}

template <typename T>
Mat<T> SpeakerEncoder<T>::Forward(const Mat<T>& embeddings) const {
  Require(embeddings.cols() == proj.weight.value.rows(),
          ErrorCode::kShapeMismatch, "speaker embedding width");
  return proj.Forward(embeddings);
}

template <typename T>
Mat<T> SpeakerEncoder<T>::Backward(const Mat<T>& dmu, const Mat<T>& embeddings) {
  return proj.Backward(dmu, embeddings);
}

template <typename T>
PriorStats<T> SpeakerEncoder<T>::Prior(const SpeakerEmbedding& s,
                                       Index frames) const {
  Mat<T> e(1, static_cast<Index>(s.values.size()));
  for (size_t i = 0; i < s.values.size(); ++i)
    e(0, static_cast<Index>(i)) = static_cast<T>(s.values[i]);
  const Mat<T> mu = Forward(e);
  PriorStats<T> stats;
  stats.mu = mu.replicate(frames, 1);
  return stats;
}

template <typename T>
void SpeakerEncoder<T>::Collect(const std::string& prefix, ParamList<T>* params) {
  proj.Collect(prefix, params);
}

#define GLOWVC_INSTANTIATE(T)                                               \
  template Mat<T> UpsampleByDuration<T>(const Mat<T>&, std::span<const int>); \
  template double GaussianLoglik<T>(const Mat<T>&, const Mat<T>&);          \
  template PriorStats<T> PitchPrior<T>(std::span<const float>);             \
  template class ContentEncoder<T>;                                         \
  template class SpeakerEncoder<T>;

GLOWVC_INSTANTIATE(float)
GLOWVC_INSTANTIATE(double)

#undef GLOWVC_INSTANTIATE

}  // namespace glowvc
