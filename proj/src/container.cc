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


#include "glowvc/container.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "glowvc/error.h"

namespace glowvc {

namespace {

constexpr char kMagic[4] = {'G', 'V', 'C', 'K'};
constexpr size_t kPreambleSize = 4 + 4 + 8;

template <typename U>
void PutLe(std::vector<uint8_t>* out, U v) {
  for (size_t i = 0; i < sizeof(U); ++i)
    out->push_back(static_cast<uint8_t>(v >> (8 * i)));
}

template <typename U>
U GetLe(const uint8_t* p) {
  U v = 0;
  for (size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

}  // namespace

Tensor Tensor::FromMat(const Mat<float>& m) {
  Tensor t;
  t.shape = {m.rows(), m.cols()};
  t.data.assign(m.data(), m.data() + m.size());
  return t;
}

Tensor Tensor::FromVector(std::span<const float> v) {
  Tensor t;
  t.shape = {static_cast<int64_t>(v.size())};
  t.data.assign(v.begin(), v.end());
  return t;
}

int64_t Tensor::elements() const {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

Mat<float> Tensor::ToMat() const {
  Require(shape.size() == 1 || shape.size() == 2, ErrorCode::kShapeMismatch,
          "only rank-1 and rank-2 tensors map to matrices");
  const Index rows = shape[0];
  const Index cols = shape.size() == 2 ? shape[1] : 1;
  Mat<float> m(rows, cols);
  if (m.size() > 0) std::memcpy(m.data(), data.data(), data.size() * sizeof(float));
  return m;
}

const Tensor& Container::Get(const std::string& name) const {
  const auto it = tensors.find(name);
  Require(it != tensors.end(), ErrorCode::kCorruptIndex,
          "missing tensor '" + name + "'");
  return it->second;
}

std::vector<uint8_t> EncodeContainer(const Container& c) {
  nlohmann::json index = nlohmann::json::object();
  uint64_t offset = 0;
  for (const auto& [name, t] : c.tensors) {
    Require(t.elements() == static_cast<int64_t>(t.data.size()),
            ErrorCode::kShapeMismatch, "tensor '" + name + "' shape");
    const uint64_t length = t.data.size() * sizeof(float);
    index[name] = {{"dtype", "float32"},
                   {"shape", t.shape},
                   {"offset", offset},
                   {"length", length}};
    offset += length;
  }
  nlohmann::json header = {{"meta", c.meta}, {"tensors", index}};
  const std::string text = header.dump();

  std::vector<uint8_t> out;
  out.reserve(kPreambleSize + text.size() + offset);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  PutLe<uint32_t>(&out, kContainerVersion);
  PutLe<uint64_t>(&out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& [name, t] : c.tensors)
    for (float v : t.data) PutLe<uint32_t>(&out, std::bit_cast<uint32_t>(v));
  return out;
}

Container DecodeContainer(std::span<const uint8_t> bytes) {
  Require(bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0,
          ErrorCode::kBadMagic, "not a GVCK container");
  Require(bytes.size() >= kPreambleSize, ErrorCode::kCorruptIndex,
          "truncated preamble");
  const uint32_t version = GetLe<uint32_t>(bytes.data() + 4);
  Require(version == kContainerVersion, ErrorCode::kVersionUnsupported,
          "container version " + std::to_string(version));
  const uint64_t header_len = GetLe<uint64_t>(bytes.data() + 8);
  Require(header_len <= bytes.size() - kPreambleSize, ErrorCode::kCorruptIndex,
          "header extends past the end of the file");
  const auto* text = reinterpret_cast<const char*>(bytes.data() + kPreambleSize);
  nlohmann::json header =
      nlohmann::json::parse(text, text + header_len, nullptr, false);
  Require(!header.is_discarded() && header.is_object() &&
              header.contains("meta") && header.contains("tensors") &&
              header["tensors"].is_object(),
          ErrorCode::kCorruptIndex, "malformed header");

  const uint8_t* payload = bytes.data() + kPreambleSize + header_len;
  const uint64_t payload_len = bytes.size() - kPreambleSize - header_len;
  Container c;
  c.meta = header["meta"];
  for (const auto& [name, entry] : header["tensors"].items()) {
    Require(entry.is_object() && entry.value("dtype", "") == "float32" &&
                entry.contains("shape") && entry["shape"].is_array() &&
                entry.contains("offset") && entry["offset"].is_number_unsigned() &&
                entry.contains("length") && entry["length"].is_number_unsigned(),
            ErrorCode::kCorruptIndex, "malformed index entry '" + name + "'");
    const uint64_t offset = entry["offset"].get<uint64_t>();
    const uint64_t length = entry["length"].get<uint64_t>();
    Require(offset <= payload_len && length <= payload_len - offset,
            ErrorCode::kCorruptIndex, "tensor '" + name + "' out of bounds");
    Tensor t;
    for (const auto& d : entry["shape"]) {
      Require(d.is_number_integer() && d.get<int64_t>() >= 0,
              ErrorCode::kCorruptIndex, "bad shape of '" + name + "'");
      t.shape.push_back(d.get<int64_t>());
    }
    Require(static_cast<uint64_t>(t.elements()) * sizeof(float) == length,
            ErrorCode::kShapeMismatch,
            "tensor '" + name + "' byte length does not match its shape");
    t.data.resize(length / sizeof(float));
    for (size_t i = 0; i < t.data.size(); ++i)
      t.data[i] = std::bit_cast<float>(GetLe<uint32_t>(payload + offset + 4 * i));
    c.tensors.emplace(name, std::move(t));
  }
  return c;
}

std::vector<uint8_t> ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.good(), ErrorCode::kIo, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void WriteFileBytes(const std::string& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(out.good(), ErrorCode::kIo, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  Require(out.good(), ErrorCode::kIo, "write failed for " + path);
}

Container ReadContainer(const std::string& path) {
  return DecodeContainer(ReadFileBytes(path));
}

void WriteContainer(const std::string& path, const Container& c) {
  WriteFileBytes(path, EncodeContainer(c));
}

}  // namespace glowvc
