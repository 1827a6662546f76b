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

#include "nmm/train.hpp"

// JSON configuration files with sections model / optimizer / task / train.
// Every key is optional and falls back to its documented default; unknown
// sections or keys are rejected with the offending name, and all invariants
// are checked before any compute. Schema (defaults in parentheses):
//
//   model:     C (384), R (5), k (11), towers ([5,6,7]), vocab (28),
//              feature_dim (80), tower_dropout_p (0), dropout_p (0.1),
//              se_reduction (8)
//   optimizer: lr_init (0.1), beta1 (0.8), beta2 (0.25),
//              weight_decay (1e-3), lr_final (1e-5), warmup_steps (1000)
//   task:      frames_per_symbol (32), noise_std (0.02), min_len (2),
//              max_len (8), freq_masks (2), freq_width_max (4),
//              time_masks (2), time_width_max (16)
//   train:     steps (300), batch_size (8), seed (1), eval_every (50),
//              eval_set_size (32)
namespace nmm {

FullConfig parse_config(const std::string& json_text);
FullConfig load_config_file(const std::string& path);

// Canonical serialized form (alphabetical keys, two-space indent); this is
// the text embedded in checkpoints, and serialize(parse(s)) == s for any
// canonical s.
std::string serialize_config(const FullConfig& cfg);

}  // namespace nmm
