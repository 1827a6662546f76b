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
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nmm/mixture.hpp"
#include "nmm/train.hpp"

// Binary checkpoint container. Layout, all integers little-endian:
//   magic "NMM1"
//   u16   format version (1)
//   u64   config length, followed by that many bytes of canonical JSON
//   u32   record count
//   per record: u32 name length + UTF-8 name, u32 rank (3),
//               u64 dims[rank], little-endian f32 payload
//   u64   FNV-1a 64 checksum of every preceding byte
// Records hold the trainable parameters followed by the batchnorm running
// statistics, in the model's canonical visitation order, so save -> load ->
// save reproduces the file byte for byte.
namespace nmm {

struct TensorBlob {
  int64_t batch = 0;
  int64_t channels = 0;
  int64_t time = 0;
  std::vector<float> values;
};

struct Checkpoint {
  FullConfig config;
  std::vector<std::pair<std::string, TensorBlob>> tensors;
};

Checkpoint checkpoint_from_model(const FullConfig& cfg, Model<float>& model);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Copies every record into the matching named tensor; throws on missing,
// extra, or shape-mismatched records.
void load_into_model(const Checkpoint& ckpt, Model<float>& model);

// Convenience: rebuilds the model recorded in the file.
struct LoadedModel {
  FullConfig config;
  Model<float> model;
};
LoadedModel load_model(const std::string& path);

uint64_t fnv1a64(const void* data, size_t size, uint64_t seed = 0xcbf29ce484222325ull);

}  // namespace nmm
