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


#include "glowvc/features.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <numbers>

#include "glowvc/error.h"

namespace glowvc {

namespace {

uint32_t ReadU32(std::span<const uint8_t> b, size_t at) {
  return static_cast<uint32_t>(b[at]) | (static_cast<uint32_t>(b[at + 1]) << 8) |
         (static_cast<uint32_t>(b[at + 2]) << 16) |
         (static_cast<uint32_t>(b[at + 3]) << 24);
}

uint16_t ReadU16(std::span<const uint8_t> b, size_t at) {
  return static_cast<uint16_t>(b[at] | (b[at + 1] << 8));
}

void PutU32(std::vector<uint8_t>* out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out->push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void PutU16(std::vector<uint8_t>* out, uint16_t v) {
  out->push_back(static_cast<uint8_t>(v));
  out->push_back(static_cast<uint8_t>(v >> 8));
}

void CheckWave(const WaveForm& wave, Index min_samples) {
  Require(wave.sample_rate == kSampleRate, ErrorCode::kUnsupportedFormat,
          "sample rate " + std::to_string(wave.sample_rate));
  Require(static_cast<Index>(wave.samples.size()) >= min_samples,
          ErrorCode::kTooShort,
          std::to_string(wave.samples.size()) + " samples, need at least " +
              std::to_string(min_samples));
}

struct FftwPlanDeleter {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};

// Real-to-complex transform of a fixed size with owned buffers.
class RealFft {
 public:
  explicit RealFft(Index n)
      : n_(n),
        in_(static_cast<double*>(fftw_malloc(sizeof(double) * n)), fftw_free),
        out_(static_cast<fftw_complex*>(
                 fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1))),
             fftw_free),
        plan_(fftw_plan_dft_r2c_1d(static_cast<int>(n), in_.get(), out_.get(),
                                   FFTW_ESTIMATE)) {}

  double* input() { return in_.get(); }

  // Power spectrum of the current input, n/2 + 1 bins.
  void Power(std::vector<double>* power) {
    fftw_execute(plan_.get());
    power->resize(static_cast<size_t>(n_ / 2 + 1));
    for (Index k = 0; k <= n_ / 2; ++k) {
      const double re = out_.get()[k][0], im = out_.get()[k][1];
      (*power)[k] = re * re + im * im;
    }
  }

 private:
  Index n_;
  std::unique_ptr<double, decltype(&fftw_free)> in_;
  std::unique_ptr<fftw_complex, decltype(&fftw_free)> out_;
  std::unique_ptr<fftw_plan_s, FftwPlanDeleter> plan_;
};

// n_mels x (fft/2 + 1) triangular filters on the HTK mel scale, unit peak.
Eigen::MatrixXd MelFilterbank(const StftConfig& cfg) {
  const Index bins = cfg.fft_size / 2 + 1;
  const double mel_lo = HzToMel(cfg.f_min), mel_hi = HzToMel(cfg.f_max);
  std::vector<double> edges(static_cast<size_t>(cfg.n_mels + 2));
  for (size_t i = 0; i < edges.size(); ++i)
    edges[i] = MelToHz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                    static_cast<double>(cfg.n_mels + 1));
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(cfg.n_mels, bins);
  for (Index m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    for (Index k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * kSampleRate /
                       static_cast<double>(cfg.fft_size);
      const double up = (f - lo) / (center - lo);
      const double down = (hi - f) / (hi - center);
      fb(m, k) = std::max(0.0, std::min(up, down));
    }
  }
  return fb;
}

}  // namespace

WaveForm ParseWav(std::span<const uint8_t> b) {
  Require(b.size() >= 12 && std::memcmp(b.data(), "RIFF", 4) == 0 &&
              std::memcmp(b.data() + 8, "WAVE", 4) == 0,
          ErrorCode::kMalformedRiff, "missing RIFF/WAVE magic");
  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const uint32_t size = ReadU32(b, pos + 4);
    const size_t body = pos + 8;
    Require(body + size <= b.size(), ErrorCode::kMalformedRiff,
            "chunk overruns file");
    if (std::memcmp(b.data() + pos, "fmt ", 4) == 0) {
      Require(size >= 16, ErrorCode::kMalformedRiff, "short fmt chunk");
      format = ReadU16(b, body);
      channels = ReadU16(b, body + 2);
      rate = ReadU32(b, body + 4);
      bits = ReadU16(b, body + 14);
      have_fmt = true;
    } else if (std::memcmp(b.data() + pos, "data", 4) == 0) {
      Require(have_fmt, ErrorCode::kMalformedRiff, "data before fmt chunk");
      Require(format == 1, ErrorCode::kUnsupportedFormat,
              "audio format " + std::to_string(format) + " is not PCM");
      Require(channels == 1, ErrorCode::kUnsupportedFormat,
              std::to_string(channels) + " channels");
      Require(bits == 16, ErrorCode::kUnsupportedFormat,
              std::to_string(bits) + "-bit samples");
      Require(rate == kSampleRate, ErrorCode::kUnsupportedFormat,
              "sample rate " + std::to_string(rate));
      WaveForm wave;
      wave.sample_rate = static_cast<int>(rate);
      wave.samples.resize(size / 2);
      for (size_t i = 0; i < wave.samples.size(); ++i) {
        const auto v = static_cast<int16_t>(ReadU16(b, body + 2 * i));
        wave.samples[i] = static_cast<float>(v) / 32768.0f;
      }
      return wave;
    }
    pos = body + size + (size & 1);
  }
  Fail(ErrorCode::kMalformedRiff, "no data chunk");
}

WaveForm LoadWav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.good(), ErrorCode::kIo, "cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return ParseWav(bytes);
}

std::vector<uint8_t> EncodeWav(const WaveForm& wave) {
  const uint32_t data_bytes = static_cast<uint32_t>(wave.samples.size() * 2);
  std::vector<uint8_t> out;
  out.reserve(44 + data_bytes);
  for (char c : std::string("RIFF")) out.push_back(static_cast<uint8_t>(c));
  PutU32(&out, 36 + data_bytes);
  for (char c : std::string("WAVEfmt ")) out.push_back(static_cast<uint8_t>(c));
  PutU32(&out, 16);
  PutU16(&out, 1);
  PutU16(&out, 1);
  PutU32(&out, static_cast<uint32_t>(wave.sample_rate));
  PutU32(&out, static_cast<uint32_t>(wave.sample_rate) * 2);
  PutU16(&out, 2);
  PutU16(&out, 16);
  for (char c : std::string("data")) out.push_back(static_cast<uint8_t>(c));
  PutU32(&out, data_bytes);
  for (float s : wave.samples) {
    const float clipped = std::clamp(s, -1.0f, 1.0f);
    const auto q = static_cast<int16_t>(
        std::clamp(std::lround(clipped * 32768.0f), -32768L, 32767L));
    PutU16(&out, static_cast<uint16_t>(q));
  }
  return out;
}

void SaveWav(const std::string& path, const WaveForm& wave) {
  const std::vector<uint8_t> bytes = EncodeWav(wave);
  std::ofstream out(path, std::ios::binary);
  Require(out.good(), ErrorCode::kIo, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

Index NumFrames(Index samples, Index window, Index hop) {
  if (samples < window) return 0;
  return 1 + (samples - window) / hop;
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> MelCenterFrequencies(const StftConfig& cfg) {
  const double lo = HzToMel(cfg.f_min), hi = HzToMel(cfg.f_max);
  std::vector<double> centers(static_cast<size_t>(cfg.n_mels));
  for (Index m = 0; m < cfg.n_mels; ++m)
    centers[m] = MelToHz(lo + (hi - lo) * static_cast<double>(m + 1) /
                                  static_cast<double>(cfg.n_mels + 1));
  return centers;
}

MelSpectrogram ComputeMelSpectrogram(const WaveForm& wave,
                                     const StftConfig& cfg) {
  CheckWave(wave, cfg.window);
  const Index frames =
      NumFrames(static_cast<Index>(wave.samples.size()), cfg.window, cfg.hop);
  const Eigen::MatrixXd fb = MelFilterbank(cfg);
  std::vector<double> hann(static_cast<size_t>(cfg.window));
  for (Index n = 0; n < cfg.window; ++n)
    hann[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                   static_cast<double>(cfg.window));
  RealFft fft(cfg.fft_size);
  std::vector<double> power;
  MelSpectrogram mel;
  mel.frames.resize(frames, cfg.n_mels);
  const double log_floor = std::log(cfg.amplitude_floor);
  for (Index t = 0; t < frames; ++t) {
    double* in = fft.input();
    std::fill(in, in + cfg.fft_size, 0.0);
    const size_t start = static_cast<size_t>(t * cfg.hop);
    for (Index n = 0; n < cfg.window; ++n)
      in[n] = static_cast<double>(wave.samples[start + n]) * hann[n];
    fft.Power(&power);
    const Eigen::Map<const Eigen::VectorXd> p(power.data(),
                                              static_cast<Index>(power.size()));
    const Eigen::VectorXd energies = fb * p;
    for (Index m = 0; m < cfg.n_mels; ++m)
      mel.frames(t, m) = static_cast<float>(
          std::max(std::log(std::max(energies[m], cfg.amplitude_floor)), log_floor));
  }
  return mel;
}

PitchTrack EstimateF0(const WaveForm& wave, const F0Config& cfg) {
  CheckWave(wave, cfg.window);
  const Index frames =
      NumFrames(static_cast<Index>(wave.samples.size()), cfg.window, cfg.hop);
  const Index lag_min =
      static_cast<Index>(std::ceil(kSampleRate / cfg.f_max));
  const Index lag_max = std::min<Index>(
      static_cast<Index>(std::floor(kSampleRate / cfg.f_min)), cfg.window - 2);
  PitchTrack track;
  track.f0_hz.assign(static_cast<size_t>(frames), 0.0f);
  track.voiced.assign(static_cast<size_t>(frames), false);
  std::vector<double> x(static_cast<size_t>(cfg.window));
  std::vector<double> r(static_cast<size_t>(lag_max + 2), 0.0);
  for (Index t = 0; t < frames; ++t) {
    const size_t start = static_cast<size_t>(t * cfg.hop);
    double energy = 0.0;
    for (Index n = 0; n < cfg.window; ++n) {
      x[n] = wave.samples[start + n];
      energy += x[n] * x[n];
    }
    const double rms = std::sqrt(energy / static_cast<double>(cfg.window));
    if (rms <= cfg.rms_floor) continue;
    // Normalized autocorrelation over the overlapping part of the window.
    for (Index lag = lag_min - 1; lag <= lag_max + 1; ++lag) {
      double xy = 0.0, xx = 0.0, yy = 0.0;
      for (Index n = 0; n + lag < cfg.window; ++n) {
        xy += x[n] * x[n + lag];
        xx += x[n] * x[n];
        yy += x[n + lag] * x[n + lag];
      }
      r[lag] = (xx > 0.0 && yy > 0.0) ? xy / std::sqrt(xx * yy) : 0.0;
    }
    double best = -1.0;
    for (Index lag = lag_min; lag <= lag_max; ++lag)
      if (r[lag] >= r[lag - 1] && r[lag] > r[lag + 1]) best = std::max(best, r[lag]);
    if (best <= cfg.voicing_threshold) continue;
    // Earliest local peak close to the best one guards against picking a
    // multiple of the period.
    Index pick = -1;
    for (Index lag = lag_min; lag <= lag_max && pick < 0; ++lag)
      if (r[lag] >= r[lag - 1] && r[lag] > r[lag + 1] && r[lag] >= 0.9 * best)
        pick = lag;
    const double a = r[pick - 1], b = r[pick], c = r[pick + 1];
    const double denom = a - 2.0 * b + c;
    const double delta = denom < 0.0 ? 0.5 * (a - c) / denom : 0.0;
    const double f0 = kSampleRate / (static_cast<double>(pick) + delta);
    if (f0 < cfg.f_min || f0 > cfg.f_max) continue;
    track.f0_hz[t] = static_cast<float>(f0);
    track.voiced[t] = true;
  }
  return track;
}

NormalizedPitch NormalizeF0(const PitchTrack& track) {
  const size_t n = track.f0_hz.size();
  NormalizedPitch out;
  out.values.assign(n, 0.0f);
  std::vector<size_t> voiced;
  for (size_t i = 0; i < n; ++i)
    if (track.voiced[i] && track.f0_hz[i] > 0.0f) voiced.push_back(i);
  if (voiced.empty()) return out;
  std::vector<double> logf(n);
  for (size_t i = 0; i < n; ++i) {
    if (i <= voiced.front()) {
      logf[i] = std::log(track.f0_hz[voiced.front()]);
    } else if (i >= voiced.back()) {
      logf[i] = std::log(track.f0_hz[voiced.back()]);
    }
  }
  for (size_t k = 0; k + 1 < voiced.size(); ++k) {
    const size_t a = voiced[k], b = voiced[k + 1];
    const double la = std::log(track.f0_hz[a]), lb = std::log(track.f0_hz[b]);
    for (size_t i = a; i <= b; ++i) {
      const double w = static_cast<double>(i - a) / static_cast<double>(b - a);
      logf[i] = la + w * (lb - la);
    }
  }
  double mean = 0.0;
  for (double v : logf) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : logf) var += (v - mean) * (v - mean);
  const double std = std::sqrt(var / static_cast<double>(n));
  if (std < 1e-8) return out;
  for (size_t i = 0; i < n; ++i)
    out.values[i] = static_cast<float>((logf[i] - mean) / std);
  return out;
}

}  // namespace glowvc
