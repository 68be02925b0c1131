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


#include "glowvc/model.h"

#include <cmath>
#include <numeric>
#include <random>

#include "glowvc/error.h"

namespace glowvc {

std::string_view VariantName(Variant v) {
  return v == Variant::kConditional ? "conditional" : "explicit";
}

Variant ParseVariant(std::string_view name) {
  if (name == "conditional") return Variant::kConditional;
  if (name == "explicit") return Variant::kExplicit;
  Fail(ErrorCode::kBadConfig, "unknown variant '" + std::string(name) + "'");
}

// --------------------------------------------------------------- Partition

LatentPartition LatentPartition::Make(Variant variant, std::vector<Index> widths,
                                      Index channels) {
  const size_t expected = variant == Variant::kConditional ? 2 : 3;
  Require(widths.size() == expected, ErrorCode::kBadLayout,
          std::string(VariantName(variant)) + " layout needs " +
              std::to_string(expected) + " blocks");
  Index sum = 0;
  for (Index w : widths) {
    Require(w >= 1, ErrorCode::kBadLayout, "block widths must be positive");
    sum += w;
  }
  Require(sum == channels, ErrorCode::kBadLayout,
          "block widths sum to " + std::to_string(sum) + ", expected " +
              std::to_string(channels));
  LatentPartition p;
  p.variant_ = variant;
  p.widths_ = std::move(widths);
  p.channels_ = channels;
  return p;
}

LatentPartition LatentPartition::Default(Variant variant) {
  return variant == Variant::kConditional ? Make(variant, {79, 1})
                                          : Make(variant, {40, 39, 1});
}

LatentBlock LatentPartition::Block(size_t i) const {
  Index offset = 0;
  for (size_t k = 0; k < i; ++k) offset += widths_[k];
  return {offset, widths_[i]};
}

LatentBlock LatentPartition::speaker() const {
  Require(variant_ == Variant::kExplicit, ErrorCode::kWrongVariant,
          "conditional layout has no speaker block");
  return Block(1);
}

template <typename T>
std::vector<Mat<T>> PartitionLatent(const Mat<T>& z,
                                    const LatentPartition& partition) {
  Require(z.cols() == partition.channels(), ErrorCode::kShapeMismatch,
          "latent width does not match the partition");
  std::vector<Mat<T>> blocks;
  Index offset = 0;
  for (Index w : partition.widths()) {
    blocks.push_back(z.middleCols(offset, w));
    offset += w;
  }
  return blocks;
}

template <typename T>
Mat<T> ConcatBlocks(const std::vector<Mat<T>>& blocks) {
  Require(!blocks.empty(), ErrorCode::kEmptyInput, "no blocks");
  Index cols = 0;
  for (const auto& b : blocks) {
    Require(b.rows() == blocks[0].rows(), ErrorCode::kShapeMismatch,
            "block row counts differ");
    cols += b.cols();
  }
  Mat<T> out(blocks[0].rows(), cols);
  Index offset = 0;
  for (const auto& b : blocks) {
    out.middleCols(offset, b.cols()) = b;
    offset += b.cols();
  }
  return out;
}

// ------------------------------------------------------------- ModelConfig

ModelConfig ModelConfig::Desk(Variant v) {
  ModelConfig c;
  c.variant = v;
  c.partition = LatentPartition::Default(v).widths();
  c.hidden_channels = v == Variant::kConditional ? 192 : 384;
  return c;
}

ModelConfig ModelConfig::Full(Variant v) {
  ModelConfig c = Desk(v);
  c.conv_channels = 512;
  return c;
}

ModelConfig ModelConfig::Tiny(Variant v) {
  ModelConfig c;
  c.variant = v;
  if (v == Variant::kConditional) {
    c.n_mels = 2;
    c.partition = {1, 1};
    c.squeeze = 2;
  } else {
    c.n_mels = 4;
    c.partition = {2, 1, 1};
    c.squeeze = 1;
  }
  c.speaker_dim = 3;
  c.n_speakers = 2;
  c.phoneme_vocab = 3;
  c.n_languages = 2;
  c.phoneme_dim = 2;
  c.language_dim = 1;
  c.conv_layers = 1;
  c.conv_channels = 2;
  c.conv_kernel = 3;
  c.flow_blocks = 1;
  c.hidden_channels = 3;
  c.coupling_kernel = 3;
  return c;
}

void ModelConfig::Validate() const {
  LatentPartition::Make(variant, partition, n_mels);
  Require(speaker_dim >= 1 && n_speakers >= 1 && phoneme_vocab >= 1 &&
              n_languages >= 1 && phoneme_dim >= 1 && language_dim >= 1 &&
              conv_layers >= 0 && conv_channels >= 1 && conv_kernel >= 1 &&
              flow_blocks >= 1 && hidden_channels >= 1 &&
              coupling_kernel >= 1 && squeeze >= 1,
          ErrorCode::kBadConfig, "model sizes must be positive");
  Require(conv_kernel % 2 == 1 && coupling_kernel % 2 == 1,
          ErrorCode::kBadConfig, "kernels must be odd");
  Require(dropout >= 0.0 && dropout < 1.0, ErrorCode::kBadConfig,
          "dropout must be in [0, 1)");
  Require((n_mels * squeeze) % 2 == 0, ErrorCode::kBadConfig,
          "squeezed channel count must be even");
}

void ConditioningBundle::Validate(Index frames) const {
  Require(content.TotalFrames() == frames, ErrorCode::kShapeMismatch,
          "durations sum to " + std::to_string(content.TotalFrames()) +
              ", features have " + std::to_string(frames) + " frames");
  Require(static_cast<Index>(pitch.values.size()) == frames,
          ErrorCode::kShapeMismatch, "pitch track length");
}

// ------------------------------------------------------------------ Model

template <typename T>
GlowVcModel<T>::GlowVcModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg.Validate();
  partition_ = LatentPartition::Make(cfg.variant, cfg.partition, cfg.n_mels);
  nn::Rng rng(cfg.seed);
  ContentEncoderConfig ec;
  ec.phoneme_vocab = cfg.phoneme_vocab;
  ec.n_languages = cfg.n_languages;
  ec.phoneme_dim = cfg.phoneme_dim;
  ec.language_dim = cfg.language_dim;
  ec.conv_layers = cfg.conv_layers;
  ec.conv_channels = cfg.conv_channels;
  ec.conv_kernel = cfg.conv_kernel;
  ec.dropout = cfg.dropout;
  ec.width = partition_.content().width;
  content_encoder = ContentEncoder<T>(ec, &rng);
  speaker_table = nn::Embedding<T>(cfg.n_speakers, cfg.speaker_dim, &rng);
  if (is_explicit())
    speaker_encoder =
        SpeakerEncoder<T>(cfg.speaker_dim, partition_.speaker().width, &rng);
  flow::FlowConfig fc;
  fc.channels = cfg.n_mels;
  fc.squeeze = cfg.squeeze;
  fc.blocks = cfg.flow_blocks;
  fc.hidden = cfg.hidden_channels;
  fc.kernel = cfg.coupling_kernel;
  fc.cond_dim = is_explicit() ? 0 : cfg.speaker_dim;
  fc.identity_init = cfg.identity_init;
  flow = flow::FlowStack<T>(fc, &rng);
}

template <typename T>
SpeakerEmbedding GlowVcModel<T>::Speaker(int id) const {
  Require(id >= 0 && id < num_speakers(), ErrorCode::kVocabularyOverflow,
          "speaker id " + std::to_string(id));
  SpeakerEmbedding s;
  s.values.resize(static_cast<size_t>(cfg_.speaker_dim));
  for (Index i = 0; i < cfg_.speaker_dim; ++i)
    s.values[i] = static_cast<float>(speaker_table.table.value(id, i));
  return s;
}

template <typename T>
Mat<T> GlowVcModel<T>::FlowCondition(const SpeakerEmbedding& s) const {
  if (is_explicit()) return Mat<T>();
  Require(static_cast<Index>(s.values.size()) == cfg_.speaker_dim,
          ErrorCode::kShapeMismatch, "speaker embedding width");
  Mat<T> c(1, cfg_.speaker_dim);
  for (Index i = 0; i < cfg_.speaker_dim; ++i) c(0, i) = static_cast<T>(s.values[i]);
  return c;
}

template <typename T>
PriorStats<T> GlowVcModel<T>::SpeakerPrior(const SpeakerEmbedding& s,
                                           Index frames) const {
  Require(is_explicit(), ErrorCode::kWrongVariant,
          "speaker prior exists only in the explicit variant");
  Require(static_cast<Index>(s.values.size()) == cfg_.speaker_dim,
          ErrorCode::kShapeMismatch, "speaker embedding width");
  return speaker_encoder.Prior(s, frames);
}

template <typename T>
Mat<T> GlowVcModel<T>::PriorMean(const ConditioningBundle& bundle) const {
  const Index frames = bundle.content.TotalFrames();
  bundle.Validate(frames);
  std::vector<Mat<T>> blocks;
  blocks.push_back(content_encoder.Evaluate(bundle.content));
  if (is_explicit()) blocks.push_back(SpeakerPrior(bundle.speaker, frames).mu);
  blocks.push_back(PitchPrior<T>(bundle.pitch.values).mu);
  return ConcatBlocks(blocks);
}

template <typename T>
ParamList<T> GlowVcModel<T>::Params() {
  ParamList<T> params;
  BufferList<T> buffers;
  content_encoder.Collect("content_encoder", &params, &buffers);
  speaker_table.Collect("speaker_table", &params);
  if (is_explicit()) speaker_encoder.Collect("speaker_encoder", &params);
  flow.Collect("flow", &params, &buffers);
  return params;
}

template <typename T>
BufferList<T> GlowVcModel<T>::Buffers() {
  ParamList<T> params;
  BufferList<T> buffers;
  content_encoder.Collect("content_encoder", &params, &buffers);
  flow.Collect("flow", &params, &buffers);
  return buffers;
}

// ------------------------------------------------------------- Objectives

template <typename T>
double LogPrior(const Mat<T>& z, const ConditioningBundle& bundle,
                const GlowVcModel<T>& model) {
  Require(z.cols() == model.partition().channels(), ErrorCode::kShapeMismatch,
          "latent width");
  Require(z.rows() == bundle.content.TotalFrames(), ErrorCode::kShapeMismatch,
          "latent frames do not match the conditioning");
  const Mat<T> mu = model.PriorMean(bundle);
  const auto zb = PartitionLatent(z, model.partition());
  const auto mb = PartitionLatent(mu, model.partition());
  double total = 0.0;
  for (size_t k = 0; k < zb.size(); ++k) total += GaussianLoglik(zb[k], mb[k]);
  return total;
}

template <typename T>
double Nll(const Mat<T>& x, const ConditioningBundle& bundle,
           const GlowVcModel<T>& model) {
  bundle.Validate(x.rows());
  const Segments seg = Segments::Single(x.rows());
  const Mat<T> cond = model.FlowCondition(bundle.speaker);
  const auto out = model.flow.Forward(x, seg, cond.size() ? &cond : nullptr);
  const Index valid = ValidFrames(model, x.rows());
  const Mat<T> mu = model.PriorMean(bundle);
  const double log_prior = GaussianLoglik<T>(out.z.topRows(valid), mu.topRows(valid));
  return -(log_prior + out.logdet[0]);
}

template <typename T>
Mat<T> TtsInfer(const ConditioningBundle& bundle, const GlowVcModel<T>& model,
                double temperature, uint64_t seed) {
  Require(temperature >= 0.0, ErrorCode::kBadConfig, "negative temperature");
  Mat<T> z = model.PriorMean(bundle);
  if (temperature > 0.0) {
    nn::Rng rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (Index i = 0; i < z.size(); ++i)
      z.data()[i] += static_cast<T>(temperature * dist(rng));
  }
  const Mat<T> cond = model.FlowCondition(bundle.speaker);
  return model.flow.Inverse(z, Segments::Single(z.rows()),
                            cond.size() ? &cond : nullptr);
}

namespace {

template <typename T>
struct PackedBatch {
  Mat<T> x;
  Segments segments;
  std::vector<int> speakers;
  std::vector<const ContentInput*> contents;
  Mat<T> pitch;  // sum(T_i) x 1
};

template <typename T>
PackedBatch<T> Pack(const GlowVcModel<T>& model,
                    std::span<const TrainingExample* const> batch) {
  Require(!batch.empty(), ErrorCode::kEmptyInput, "empty batch");
  PackedBatch<T> p;
  std::vector<Index> lengths;
  for (const TrainingExample* ex : batch) {
    Require(ex->mel.cols() == model.config().n_mels, ErrorCode::kShapeMismatch,
            "feature width of " + ex->id);
    Require(ex->content.TotalFrames() == ex->mel.rows() &&
                static_cast<Index>(ex->pitch.size()) == ex->mel.rows(),
            ErrorCode::kShapeMismatch, "conditioning length of " + ex->id);
    lengths.push_back(ex->mel.rows());
    p.speakers.push_back(ex->speaker_id);
    p.contents.push_back(&ex->content);
  }
  p.segments = Segments::FromLengths(lengths);
  p.x.resize(p.segments.total(), model.config().n_mels);
  p.pitch.resize(p.segments.total(), 1);
  for (size_t i = 0; i < batch.size(); ++i) {
    const Index b = p.segments.begin(static_cast<Index>(i));
    p.x.middleRows(b, lengths[i]) = batch[i]->mel.template cast<T>();
    for (Index t = 0; t < lengths[i]; ++t)
      p.pitch(b + t, 0) = static_cast<T>(batch[i]->pitch[t]);
  }
  return p;
}

}  // namespace

template <typename T>
void InitializeActNorm(GlowVcModel<T>& model,
                       std::span<const TrainingExample* const> batch) {
  const PackedBatch<T> p = Pack(model, batch);
  const Mat<T> speakers = model.speaker_table.Forward(p.speakers);
  model.flow.InitializeActNorm(p.x, p.segments,
                               model.is_explicit() ? nullptr : &speakers);
}

template <typename T>
BatchLoss BatchNll(GlowVcModel<T>& model,
                   std::span<const TrainingExample* const> batch,
                   const PassOptions& opt, bool accumulate_grads) {
  const PackedBatch<T> p = Pack(model, batch);
  const Segments& seg = p.segments;
  const Index n_items = seg.size();
  const LatentPartition& part = model.partition();
  const LatentBlock cb = part.content();
  const LatentBlock pb = part.pitch();

  const Mat<T> speakers = model.speaker_table.Forward(p.speakers);
  typename ContentEncoder<T>::Cache enc_cache;
  const Mat<T> mu_c = model.content_encoder.Forward(
      p.contents, opt, accumulate_grads ? &enc_cache : nullptr);
  Mat<T> mu_s;
  LatentBlock sb;
  if (model.is_explicit()) {
    sb = part.speaker();
    mu_s = model.speaker_encoder.Forward(speakers);
  }
  typename flow::FlowStack<T>::Cache flow_cache;
  const auto out = model.flow.Forward(
      p.x, seg, model.is_explicit() ? nullptr : &speakers,
      accumulate_grads ? &flow_cache : nullptr);
  const Mat<T>& z = out.z;

  BatchLoss loss;
  loss.item_nll.resize(static_cast<size_t>(n_items));
  const T inv_b = static_cast<T>(1.0 / static_cast<double>(n_items));
  Mat<T> dz, dmu_c, dmu_s;
  if (accumulate_grads) {
    dz = Mat<T>::Zero(z.rows(), z.cols());
    dmu_c = Mat<T>::Zero(mu_c.rows(), mu_c.cols());
    if (model.is_explicit()) dmu_s = Mat<T>::Zero(n_items, sb.width);
  }
  for (Index i = 0; i < n_items; ++i) {
    const Index b = seg.begin(i);
    const Index valid = ValidFrames(model, seg.length(i));
    const Mat<T> diff_c =
        z.block(b, cb.offset, valid, cb.width) - mu_c.middleRows(b, valid);
    const Mat<T> diff_p =
        z.block(b, pb.offset, valid, pb.width) - p.pitch.middleRows(b, valid);
    double sq = diff_c.template cast<double>().squaredNorm() +
                diff_p.template cast<double>().squaredNorm();
    Mat<T> diff_s;
    if (model.is_explicit()) {
      diff_s = z.block(b, sb.offset, valid, sb.width).rowwise() - mu_s.row(i);
      sq += diff_s.template cast<double>().squaredNorm();
    }
    const double log_prior =
        -kHalfLog2Pi * static_cast<double>(valid * part.channels()) - 0.5 * sq;
    const double nll = -(log_prior + out.logdet[i]);
    loss.item_nll[i] = nll;
    loss.total_nll += nll;
    loss.valid_frames += valid;
    if (accumulate_grads) {
      dz.block(b, cb.offset, valid, cb.width) = diff_c * inv_b;
      dz.block(b, pb.offset, valid, pb.width) = diff_p * inv_b;
      dmu_c.middleRows(b, valid) = -diff_c * inv_b;
      if (model.is_explicit()) {
        dz.block(b, sb.offset, valid, sb.width) = diff_s * inv_b;
        dmu_s.row(i) = -diff_s.colwise().sum() * inv_b;
      }
    }
  }
  loss.mean_nll = loss.total_nll / static_cast<double>(n_items);
  Require(std::isfinite(loss.mean_nll), ErrorCode::kNonFiniteLoss,
          "batch nll is not finite");
  if (!accumulate_grads) return loss;

  const std::vector<double> dlogdet(static_cast<size_t>(n_items),
                                    -1.0 / static_cast<double>(n_items));
  auto fg = model.flow.Backward(dz, dlogdet, flow_cache);
  model.content_encoder.Backward(dmu_c, enc_cache);
  Mat<T> dspeakers = Mat<T>::Zero(n_items, model.config().speaker_dim);
  if (model.is_explicit()) {
    dspeakers += model.speaker_encoder.Backward(dmu_s, speakers);
  } else if (fg.dcond.size() > 0) {
    dspeakers += fg.dcond;
  }
  model.speaker_table.Backward(dspeakers, p.speakers);
  return loss;
}

#define GLOWVC_INSTANTIATE(T)                                                  \
  template std::vector<Mat<T>> PartitionLatent<T>(const Mat<T>&,               \
                                                  const LatentPartition&);     \
  template Mat<T> ConcatBlocks<T>(const std::vector<Mat<T>>&);                 \
  template class GlowVcModel<T>;                                               \
  template double LogPrior<T>(const Mat<T>&, const ConditioningBundle&,        \
                              const GlowVcModel<T>&);                          \
  template double Nll<T>(const Mat<T>&, const ConditioningBundle&,             \
                         const GlowVcModel<T>&);                               \
  template Mat<T> TtsInfer<T>(const ConditioningBundle&, const GlowVcModel<T>&, \
                              double, uint64_t);                               \
  template BatchLoss BatchNll<T>(GlowVcModel<T>&,                              \
                                 std::span<const TrainingExample* const>,      \
                                 const PassOptions&, bool);                    \
  template void InitializeActNorm<T>(GlowVcModel<T>&,                          \
                                     std::span<const TrainingExample* const>);

GLOWVC_INSTANTIATE(float)
GLOWVC_INSTANTIATE(double)

#undef GLOWVC_INSTANTIATE

}  // namespace glowvc
