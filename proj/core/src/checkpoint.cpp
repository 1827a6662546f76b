/* Copyright 2026 The NMM Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "nmm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "nmm/config.hpp"

namespace nmm {
namespace {

constexpr char kMagic[4] = {'N', 'M', 'M', '1'};
constexpr uint16_t kVersion = 1;

void put_bytes(std::string& out, const void* data, size_t size) {
  out.append(static_cast<const char*>(data), size);
}

void put_u16(std::string& out, uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  put_bytes(out, b, 2);
}

void put_u32(std::string& out, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  put_bytes(out, b, 4);
}

void put_u64(std::string& out, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  put_bytes(out, b, 8);
}

void put_f32(std::string& out, float v) {
  put_u32(out, std::bit_cast<uint32_t>(v));
}

class Reader {
 public:
  Reader(const std::string& data, std::string path)
      : data_(&data), path_(std::move(path)) {}

  void read(void* out, size_t size) {
    NMM_CHECK(pos_ + size <= data_->size(), CheckpointError,
              "checkpoint '" << path_ << "': truncated file");
    std::memcpy(out, data_->data() + pos_, size);
    pos_ += size;
  }

  uint16_t u16() {
    unsigned char b[2];
    read(b, 2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
  }
  uint32_t u32() {
    unsigned char b[4];
    read(b, 4);
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  uint64_t u64() {
    unsigned char b[8];
    read(b, 8);
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }

  std::string str(size_t size) {
    std::string s(size, '\0');
    read(s.data(), size);
    return s;
  }

  size_t pos() const { return pos_; }

 private:
  const std::string* data_;
  std::string path_;
  size_t pos_ = 0;
};

}  // namespace

uint64_t fnv1a64(const void* data, size_t size, uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

Checkpoint checkpoint_from_model(const FullConfig& cfg, Model<float>& model) {
  Checkpoint ckpt;
  ckpt.config = cfg;
  auto grab = [&ckpt](const std::string& name, Tensor<float>& t) {
    TensorBlob blob;
    blob.batch = t.batch();
    blob.channels = t.channels();
    blob.time = t.time();
    blob.values.assign(t.values().begin(), t.values().end());
    ckpt.tensors.emplace_back(name, std::move(blob));
  };
  model.visit_params(grab);
  model.visit_buffers(grab);
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string out;
  put_bytes(out, kMagic, 4);
  put_u16(out, kVersion);
  const std::string config_text = serialize_config(ckpt.config);
  put_u64(out, config_text.size());
  put_bytes(out, config_text.data(), config_text.size());
  put_u32(out, static_cast<uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, blob] : ckpt.tensors) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    put_bytes(out, name.data(), name.size());
    put_u32(out, 3);
    put_u64(out, static_cast<uint64_t>(blob.batch));
    put_u64(out, static_cast<uint64_t>(blob.channels));
    put_u64(out, static_cast<uint64_t>(blob.time));
    for (const float v : blob.values) put_f32(out, v);
  }
  put_u64(out, fnv1a64(out.data(), out.size()));

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  NMM_CHECK(file.good(), CheckpointError,
            "checkpoint: cannot open '" << path << "' for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  NMM_CHECK(file.good(), CheckpointError,
            "checkpoint: write to '" << path << "' failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  NMM_CHECK(file.good(), CheckpointError,
            "checkpoint: cannot open '" << path << "'");
  std::string data((std::istreambuf_iterator<char>(file)),
                   std::istreambuf_iterator<char>());
  NMM_CHECK(data.size() >= 4 + 2 + 8 + 4 + 8, CheckpointError,
            "checkpoint '" << path << "': truncated file");

  const uint64_t expected = fnv1a64(data.data(), data.size() - 8);
  // Checksum is the trailing 8 bytes, little-endian.
  uint64_t actual = 0;
  for (int i = 7; i >= 0; --i)
    actual = (actual << 8) |
             static_cast<unsigned char>(data[data.size() - 8 + static_cast<size_t>(i)]);
  NMM_CHECK(actual == expected, CheckpointError,
            "checkpoint '" << path << "': checksum mismatch");

  Reader in(data, path);
  char magic[4];
  in.read(magic, 4);
  NMM_CHECK(std::memcmp(magic, kMagic, 4) == 0, CheckpointError,
            "checkpoint '" << path << "': bad magic");
  const uint16_t version = in.u16();
  NMM_CHECK(version == kVersion, CheckpointError,
            "checkpoint '" << path << "': unsupported version " << version);

  Checkpoint ckpt;
  const uint64_t config_len = in.u64();
  ckpt.config = parse_config(in.str(config_len));

  const uint32_t count = in.u32();
  ckpt.tensors.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = in.u32();
    std::string name = in.str(name_len);
    const uint32_t rank = in.u32();
    NMM_CHECK(rank == 3, CheckpointError,
              "checkpoint '" << path << "': record '" << name
                             << "' has rank " << rank << ", expected 3");
    TensorBlob blob;
    blob.batch = static_cast<int64_t>(in.u64());
    blob.channels = static_cast<int64_t>(in.u64());
    blob.time = static_cast<int64_t>(in.u64());
    const uint64_t n = static_cast<uint64_t>(blob.batch) *
                       static_cast<uint64_t>(blob.channels) *
                       static_cast<uint64_t>(blob.time);
    blob.values.resize(n);
    for (uint64_t j = 0; j < n; ++j) blob.values[j] = in.f32();
    ckpt.tensors.emplace_back(std::move(name), std::move(blob));
  }
  NMM_CHECK(in.pos() == data.size() - 8, CheckpointError,
            "checkpoint '" << path << "': trailing bytes before checksum");
  return ckpt;
}

void load_into_model(const Checkpoint& ckpt, Model<float>& model) {
  std::map<std::string, const TensorBlob*> records;
  for (const auto& [name, blob] : ckpt.tensors) records[name] = &blob;

  size_t used = 0;
  auto fill = [&records, &used](const std::string& name, Tensor<float>& t) {
    const auto it = records.find(name);
    NMM_CHECK(it != records.end(), CheckpointError,
              "checkpoint: missing record '" << name << "'");
    const TensorBlob& blob = *it->second;
    NMM_CHECK(blob.batch == t.batch() && blob.channels == t.channels() &&
                  blob.time == t.time(),
              CheckpointError,
              "checkpoint: record '" << name << "' has shape (" << blob.batch
                                     << "," << blob.channels << "," << blob.time
                                     << "), model expects (" << t.batch() << ","
                                     << t.channels() << "," << t.time() << ")");
    std::copy(blob.values.begin(), blob.values.end(), t.values().begin());
    ++used;
  };
  model.visit_params(fill);
  model.visit_buffers(fill);
  NMM_CHECK(used == ckpt.tensors.size(), CheckpointError,
            "checkpoint: " << ckpt.tensors.size() - used
                           << " unused record(s); file does not match model");
}

LoadedModel load_model(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  Rng rng(model_init_seed(ckpt.config));
  LoadedModel loaded{ckpt.config, Model<float>(ckpt.config.model, rng)};
  load_into_model(ckpt, loaded.model);
  return loaded;
}

}  // namespace nmm
