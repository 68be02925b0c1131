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
#include <filesystem>

#include "doctest.h"

#include "glowvc/error.h"
#include "glowvc/features.h"
#include "test_util.h"

namespace glowvc {
namespace {

using testing::Median;
using testing::Sine;

std::vector<uint8_t> WavBytes(int rate, int channels, int bits, int format,
                              const std::vector<int16_t>& pcm) {
  std::vector<uint8_t> b;
  auto put = [&](uint32_t v, int n) {
    for (int i = 0; i < n; ++i) b.push_back(static_cast<uint8_t>(v >> (8 * i)));
  };
  auto tag = [&](const char* s) { b.insert(b.end(), s, s + 4); };
  const uint32_t data_len = static_cast<uint32_t>(pcm.size() * 2);
  tag("RIFF");
  put(36 + data_len, 4);
  tag("WAVE");
  tag("fmt ");
  put(16, 4);
  put(format, 2);
  put(channels, 2);
  put(rate, 4);
  put(rate * channels * bits / 8, 4);
  put(channels * bits / 8, 2);
  put(bits, 2);
  tag("data");
  put(data_len, 4);
  for (int16_t v : pcm) put(static_cast<uint16_t>(v), 2);
  return b;
}

TEST_CASE("wav: one second at 16 kHz gives 16000 samples") {
  const WaveForm w = ParseWav(WavBytes(16000, 1, 16, 1, std::vector<int16_t>(16000, 1000)));
  CHECK(w.samples.size() == 16000);
  CHECK(w.sample_rate == 16000);
  CHECK(w.samples[0] == doctest::Approx(1000.0 / 32768.0));
}

TEST_CASE("wav: all-zero payload decodes to exact zeros") {
  const WaveForm w = ParseWav(WavBytes(16000, 1, 16, 1, std::vector<int16_t>(400, 0)));
  for (float v : w.samples) CHECK(v == 0.0f);
}

TEST_CASE("wav: format errors") {
  auto code = [](const std::vector<uint8_t>& bytes) {
    try {
      ParseWav(bytes);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kIo;
  };
  const std::vector<int16_t> pcm(100, 0);
  CHECK(code(WavBytes(44100, 1, 16, 1, pcm)) == ErrorCode::kUnsupportedFormat);
  CHECK(code(WavBytes(16000, 2, 16, 1, pcm)) == ErrorCode::kUnsupportedFormat);
  CHECK(code(WavBytes(16000, 1, 16, 3, pcm)) == ErrorCode::kUnsupportedFormat);
  auto bad = WavBytes(16000, 1, 16, 1, pcm);
  bad[0] = 'X';
  CHECK(code(bad) == ErrorCode::kMalformedRiff);
  CHECK(code(std::vector<uint8_t>(bad.begin(), bad.begin() + 10)) ==
        ErrorCode::kMalformedRiff);
}

TEST_CASE("wav: encode then parse round-trips 16-bit samples") {
  WaveForm w = Sine(300.0, 1600, 0.5);
  for (float& v : w.samples) v = std::round(v * 32768.0f) / 32768.0f;
  const WaveForm back = ParseWav(EncodeWav(w));
  REQUIRE(back.samples.size() == w.samples.size());
  for (size_t i = 0; i < w.samples.size(); ++i) CHECK(back.samples[i] == w.samples[i]);
  const auto path = std::filesystem::temp_directory_path() / "glowvc_features_rt.wav";
  SaveWav(path.string(), w);
  CHECK(LoadWav(path.string()).samples == back.samples);
  std::filesystem::remove(path);
}

TEST_CASE("mel: frame count and the silence floor") {
  WaveForm w;
  w.samples.assign(16000, 0.0f);
  const MelSpectrogram m = ComputeMelSpectrogram(w);
  CHECK(m.frames.rows() == 77);
  CHECK(m.frames.cols() == 80);
  for (Index i = 0; i < m.frames.size(); ++i)
    CHECK(m.frames.data()[i] == doctest::Approx(std::log(1e-10)).epsilon(1e-6));
  CHECK(NumFrames(16000, 800, 200) == 77);
  CHECK(NumFrames(800, 800, 200) == 1);
}

TEST_CASE("mel: too-short input is rejected") {
  WaveForm w;
  w.samples.assign(799, 0.1f);
  CHECK_THROWS_AS(ComputeMelSpectrogram(w), Error);
  CHECK_THROWS_AS(EstimateF0(w), Error);
}

TEST_CASE("mel: matches a direct DFT oracle") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 0.2);
  WaveForm w = Sine(440.0, 2400, 0.7);
  for (float& v : w.samples) v += static_cast<float>(n(rng));
  const MelSpectrogram m = ComputeMelSpectrogram(w);
  const Eigen::MatrixXd oracle = testing::OracleLogMel(w.samples);
  REQUIRE(oracle.rows() == m.frames.rows());
  double worst = 0.0;
  for (Index t = 0; t < oracle.rows(); ++t)
    for (Index c = 0; c < oracle.cols(); ++c)
      worst = std::max(worst, std::abs(oracle(t, c) - m.frames(t, c)));
  CHECK(worst < 1e-3);
}

TEST_CASE("mel: 440 Hz sine peaks in the band centred nearest 440 Hz") {
  const WaveForm w = Sine(440.0, 4000);
  const MelSpectrogram m = ComputeMelSpectrogram(w);
  const std::vector<double> centers = MelCenterFrequencies(StftConfig{});
  Index nearest = 0;
  for (Index i = 1; i < static_cast<Index>(centers.size()); ++i)
    if (std::abs(centers[i] - 440.0) < std::abs(centers[nearest] - 440.0)) nearest = i;
  const Eigen::MatrixXd oracle = testing::OracleLogMel(w.samples);
  for (Index t = 0; t < m.frames.rows(); ++t) {
    Index got = 0, want = 0;
    m.frames.row(t).maxCoeff(&got);
    oracle.row(t).maxCoeff(&want);
    CHECK(got == nearest);
    CHECK(want == nearest);
  }
}

TEST_CASE("mel: scaling the waveform up never lowers a cell") {
  std::mt19937_64 rng(5);
  std::normal_distribution<float> n(0.0f, 0.1f);
  WaveForm a;
  a.samples.resize(3000);
  for (float& v : a.samples) v = n(rng);
  WaveForm b = a;
  for (float& v : b.samples) v *= 1.5f;
  const Mat<float> ma = ComputeMelSpectrogram(a).frames;
  const Mat<float> mb = ComputeMelSpectrogram(b).frames;
  CHECK((mb - ma).minCoeff() >= 0.0f);
  CHECK(ma.minCoeff() >= static_cast<float>(std::log(1e-10)) - 1e-4f);
}

TEST_CASE("f0: mel and pitch tracks share the frame count") {
  const WaveForm w = Sine(200.0, 5321);
  CHECK(ComputeMelSpectrogram(w).frames.rows() ==
        static_cast<Index>(EstimateF0(w).f0_hz.size()));
}

TEST_CASE("f0: 200 Hz sine against the autocorrelation oracle") {
  const WaveForm w = Sine(200.0, 16000);
  const PitchTrack p = EstimateF0(w);
  std::vector<double> f0;
  for (size_t t = 0; t < p.f0_hz.size(); ++t) {
    CHECK(p.voiced[t]);
    f0.push_back(p.f0_hz[t]);
    const double oracle = testing::OracleFramePitch(w.samples, static_cast<int>(t) * 200);
    CHECK(std::abs(oracle - 200.0) < 1.0);
    CHECK(std::abs(p.f0_hz[t] - oracle) < 2.0);
  }
  CHECK(std::abs(Median(f0) - 200.0) < 5.0);
}

TEST_CASE("f0: silence is unvoiced") {
  WaveForm w;
  w.samples.assign(4000, 0.0f);
  const PitchTrack p = EstimateF0(w);
  for (size_t t = 0; t < p.f0_hz.size(); ++t) {
    CHECK_FALSE(p.voiced[t]);
    CHECK(p.f0_hz[t] == 0.0f);
  }
}

TEST_CASE("f0: a 150 Hz then 300 Hz step") {
  WaveForm w = Sine(150.0, 8000);
  const WaveForm hi = Sine(300.0, 8000);
  w.samples.insert(w.samples.end(), hi.samples.begin(), hi.samples.end());
  const PitchTrack p = EstimateF0(w);
  std::vector<double> first, second;
  for (size_t t = 0; t < p.f0_hz.size(); ++t) {
    if (!p.voiced[t]) continue;
    const size_t end = t * 200 + 800;
    if (end <= 8000) first.push_back(p.f0_hz[t]);
    if (t * 200 >= 8000) second.push_back(p.f0_hz[t]);
  }
  REQUIRE(!first.empty());
  REQUIRE(!second.empty());
  const double oracle_lo = testing::OracleFramePitch(w.samples, 0);
  const double oracle_hi = testing::OracleFramePitch(w.samples, 8000);
  CHECK(std::abs(Median(first) - 150.0) < 5.0);
  CHECK(std::abs(Median(second) - 300.0) < 10.0);
  CHECK(std::abs(oracle_lo - 150.0) < 5.0);
  CHECK(std::abs(oracle_hi - 300.0) < 10.0);
}

TEST_CASE("f0: sines between 80 and 400 Hz within 2.5 percent") {
  for (double f : {80.0, 110.0, 165.0, 240.0, 333.0, 400.0}) {
    const PitchTrack p = EstimateF0(Sine(f, 6000));
    std::vector<double> v;
    for (size_t t = 0; t < p.f0_hz.size(); ++t)
      if (p.voiced[t]) v.push_back(p.f0_hz[t]);
    REQUIRE(!v.empty());
    CHECK(std::abs(Median(v) - f) < 0.025 * f);
  }
}

TEST_CASE("f0: voiced values stay within 40-600 Hz") {
  std::mt19937_64 rng(9);
  std::normal_distribution<float> n(0.0f, 0.3f);
  WaveForm w;
  w.samples.resize(8000);
  for (float& v : w.samples) v = n(rng);
  const PitchTrack p = EstimateF0(w);
  for (size_t t = 0; t < p.f0_hz.size(); ++t) {
    CHECK((p.f0_hz[t] == 0.0f) == !p.voiced[t]);
    if (p.voiced[t]) CHECK((p.f0_hz[t] >= 40.0f && p.f0_hz[t] <= 600.0f));
  }
}

TEST_CASE("normalize f0: log-domain interpolation of a gap") {
  PitchTrack p{{100.0f, 0.0f, 300.0f}, {true, false, true}};
  const NormalizedPitch n = NormalizeF0(p);
  // The filled value is the geometric mean, so the standardized track is
  // symmetric: (-c, 0, c).
  CHECK(n.values[1] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(n.values[0] == doctest::Approx(-n.values[2]));
  const double mid = std::exp(0.5 * (std::log(100.0) + std::log(300.0)));
  CHECK(mid == doctest::Approx(173.205).epsilon(1e-5));
}

TEST_CASE("normalize f0: standardized moments and edge extension") {
  PitchTrack p{{0.0f, 120.0f, 130.0f, 0.0f, 0.0f, 180.0f, 0.0f},
               {false, true, true, false, false, true, false}};
  const NormalizedPitch n = NormalizeF0(p);
  double mean = 0.0, var = 0.0;
  for (float v : n.values) mean += v;
  mean /= n.values.size();
  for (float v : n.values) var += (v - mean) * (v - mean);
  const double std = std::sqrt(var / n.values.size());
  CHECK(std::abs(mean) < 1e-5);
  CHECK(std::abs(std - 1.0) < 1e-5);
  CHECK(n.values[0] == n.values[1]);
  CHECK(n.values[6] == n.values[5]);
}

TEST_CASE("normalize f0: degenerate tracks give zeros") {
  PitchTrack silent{{0, 0, 0, 0, 0}, {false, false, false, false, false}};
  CHECK(NormalizeF0(silent).values == std::vector<float>(5, 0.0f));
  PitchTrack flat{{150, 150, 0}, {true, true, false}};
  CHECK(NormalizeF0(flat).values == std::vector<float>(3, 0.0f));
}

TEST_CASE("normalize f0: invariant to scaling every F0 value") {
  PitchTrack p{{110.0f, 0.0f, 140.0f, 175.0f, 0.0f, 95.0f},
               {true, false, true, true, false, true}};
  PitchTrack q = p;
  for (float& v : q.f0_hz) v *= 2.7f;
  const NormalizedPitch a = NormalizeF0(p), b = NormalizeF0(q);
  for (size_t i = 0; i < a.values.size(); ++i)
    CHECK(std::abs(a.values[i] - b.values[i]) < 1e-6);
}

TEST_CASE("mel scale helpers invert each other") {
  for (double hz : {0.0, 100.0, 440.0, 1000.0, 8000.0})
    CHECK(MelToHz(HzToMel(hz)) == doctest::Approx(hz).epsilon(1e-9));
}

}  // namespace
}  // namespace glowvc
