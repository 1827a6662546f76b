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
#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "nmm/checkpoint.hpp"
#include "nmm/config.hpp"

namespace nmm {
namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() /
          ("nmm_test_" + std::to_string(::getpid()) + "_" + name))
      .string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

TEST(Config, EmptyObjectYieldsDefaults) {
  const FullConfig cfg = parse_config("{}");
  EXPECT_EQ(cfg.model.channels, 384);
  EXPECT_EQ(cfg.model.blocks_per_tower, 5);
  EXPECT_EQ(cfg.model.kernel_size, 11);
  EXPECT_EQ(cfg.model.towers, (std::vector<int64_t>{5, 6, 7}));
  EXPECT_DOUBLE_EQ(cfg.optimizer.lr_init, 0.1);
  EXPECT_DOUBLE_EQ(cfg.optimizer.beta1, 0.8);
  EXPECT_DOUBLE_EQ(cfg.optimizer.beta2, 0.25);
  EXPECT_EQ(cfg.optimizer.warmup_steps, 1000);
  EXPECT_EQ(cfg.augment.freq_masks, 2);
  EXPECT_EQ(cfg.augment.time_masks, 2);
}

TEST(Config, UnknownSectionAndKeyAreRejectedByName) {
  try {
    parse_config(R"({"modell": {}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("modell"), std::string::npos);
  }
  try {
    parse_config(R"({"model": {"kernel": 11}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("kernel"), std::string::npos);
  }
}

TEST(Config, FieldErrorsNameTheField) {
  try {
    parse_config(R"({"model": {"tower_dropout_p": 1.5}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("tower_dropout_p"), std::string::npos);
  }
  try {
    parse_config(R"({"model": {"k": 4}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("model.k"), std::string::npos);
  }
  try {
    parse_config(R"({"train": {"steps": "many"}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train.steps"), std::string::npos);
  }
}

TEST(Config, CanonicalSerializationRoundTrips) {
  FullConfig cfg;
  cfg.model.channels = 24;
  cfg.model.towers = {2, 3};
  cfg.train.seed = 99;
  const std::string text = serialize_config(cfg);
  const FullConfig parsed = parse_config(text);
  EXPECT_EQ(serialize_config(parsed), text);
  EXPECT_EQ(parsed.model.channels, 24);
  EXPECT_EQ(parsed.train.seed, 99u);
}

FullConfig tiny_config() {
  FullConfig cfg;
  cfg.model.channels = 8;
  cfg.model.blocks_per_tower = 1;
  cfg.model.kernel_size = 3;
  cfg.model.towers = {2, 2};
  cfg.model.feature_dim = 6;
  cfg.model.vocab_size = 3;
  cfg.model.dropout_p = 0.0;
  cfg.train.steps = 0;
  return cfg;
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  const FullConfig cfg = tiny_config();
  Rng rng(model_init_seed(cfg));
  Model<float> model(cfg.model, rng);
  const std::string path_a = temp_path("ckpt_a.nmm");
  const std::string path_b = temp_path("ckpt_b.nmm");

  save_checkpoint(checkpoint_from_model(cfg, model), path_a);
  const Checkpoint loaded = load_checkpoint(path_a);
  save_checkpoint(loaded, path_b);
  EXPECT_EQ(read_file(path_a), read_file(path_b));
  std::remove(path_a.c_str());
  std::remove(path_b.c_str());
}

TEST(Checkpoint, RestoresEveryParameterBitExactly) {
  const FullConfig cfg = tiny_config();
  Rng rng(model_init_seed(cfg));
  Model<float> model(cfg.model, rng);
  // Perturb away from init so the test cannot pass by reconstruction.
  model.visit_params([](const std::string&, Tensor<float>& t) {
    for (auto& v : t.values()) v += 0.125f;
  });
  const std::string path = temp_path("ckpt_restore.nmm");
  save_checkpoint(checkpoint_from_model(cfg, model), path);

  const LoadedModel restored = load_model(path);
  std::vector<float> expect, got;
  model.visit_params([&expect](const std::string&, Tensor<float>& t) {
    expect.insert(expect.end(), t.values().begin(), t.values().end());
  });
  Model<float>& rm = const_cast<Model<float>&>(restored.model);
  rm.visit_params([&got](const std::string&, Tensor<float>& t) {
    got.insert(got.end(), t.values().begin(), t.values().end());
  });
  EXPECT_EQ(expect, got);
  std::remove(path.c_str());
}

TEST(Checkpoint, DetectsCorruption) {
  const FullConfig cfg = tiny_config();
  Rng rng(model_init_seed(cfg));
  Model<float> model(cfg.model, rng);
  const std::string path = temp_path("ckpt_corrupt.nmm");
  save_checkpoint(checkpoint_from_model(cfg, model), path);

  std::string bytes = read_file(path);
  bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x40);
  std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
  EXPECT_THROW(load_checkpoint(path), CheckpointError);

  std::ofstream(path, std::ios::binary | std::ios::trunc)
      << bytes.substr(0, bytes.size() / 3);
  EXPECT_THROW(load_checkpoint(path), CheckpointError);

  std::ofstream(path, std::ios::binary | std::ios::trunc) << "not a checkpoint";
  EXPECT_THROW(load_checkpoint(path), CheckpointError);
  std::remove(path.c_str());
}

TEST(Checkpoint, RejectsArchitectureMismatch) {
  const FullConfig cfg = tiny_config();
  Rng rng(model_init_seed(cfg));
  Model<float> model(cfg.model, rng);
  Checkpoint ckpt = checkpoint_from_model(cfg, model);

  FullConfig other = cfg;
  other.model.channels = 12;
  Rng rng2(1);
  Model<float> wrong(other.model, rng2);
  EXPECT_THROW(load_into_model(ckpt, wrong), CheckpointError);
}

TEST(Checkpoint, MaskedViewLeavesCheckpointBytesUnchanged) {
  const FullConfig cfg = tiny_config();
  Rng rng(model_init_seed(cfg));
  Model<float> model(cfg.model, rng);
  const std::string before = temp_path("ckpt_mask_before.nmm");
  const std::string after = temp_path("ckpt_mask_after.nmm");
  save_checkpoint(checkpoint_from_model(cfg, model), before);

  const TowerMask mask = TowerMask::parse("mb1=10,mb2=01", cfg.model);
  MaskedModel<float> view = apply_mask(model, mask);
  Rng data_rng(5);
  view.forward(Tensor<float>::randn(1, cfg.model.feature_dim, 16, data_rng));

  save_checkpoint(checkpoint_from_model(cfg, model), after);
  const std::string bytes_before = read_file(before);
  EXPECT_EQ(fnv1a64(bytes_before.data(), bytes_before.size()),
            fnv1a64(read_file(after).data(), bytes_before.size()));
  EXPECT_EQ(bytes_before, read_file(after));
  std::remove(before.c_str());
  std::remove(after.c_str());
}

}  // namespace
}  // namespace nmm
