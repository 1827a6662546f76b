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
#include "nmm/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace nmm {
namespace {

using nlohmann::json;

// Tracks which keys a section consumed and rejects leftovers.
class Section {
 public:
  Section(const json& j, std::string name) : j_(&j), name_(std::move(name)) {
    NMM_CHECK(j.is_object(), ConfigError,
              "config." << name_ << ": must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    used_.insert(key);
    if (!j_->contains(key)) return;
    try {
      out = j_->at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config." + name_ + "." + key + ": " + e.what());
    }
  }

  void finish() const {
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      NMM_CHECK(used_.count(it.key()) > 0, ConfigError,
                "config." << name_ << ": unknown key '" << it.key() << "'");
    }
  }

 private:
  const json* j_;
  std::string name_;
  std::set<std::string> used_;
};

}  // namespace

FullConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  NMM_CHECK(root.is_object(), ConfigError, "config: top level must be an object");

  FullConfig cfg;
  const std::set<std::string> known = {"model", "optimizer", "task", "train"};
  for (auto it = root.begin(); it != root.end(); ++it) {
    NMM_CHECK(known.count(it.key()) > 0, ConfigError,
              "config: unknown section '" << it.key() << "'");
  }

  if (root.contains("model")) {
    Section s(root.at("model"), "model");
    s.get("C", cfg.model.channels);
    s.get("R", cfg.model.blocks_per_tower);
    s.get("k", cfg.model.kernel_size);
    s.get("towers", cfg.model.towers);
    s.get("vocab", cfg.model.vocab_size);
    s.get("feature_dim", cfg.model.feature_dim);
    s.get("tower_dropout_p", cfg.model.tower_dropout_p);
    s.get("dropout_p", cfg.model.dropout_p);
    s.get("se_reduction", cfg.model.se_reduction);
    s.finish();
  }
  if (root.contains("optimizer")) {
    Section s(root.at("optimizer"), "optimizer");
    s.get("lr_init", cfg.optimizer.lr_init);
    s.get("beta1", cfg.optimizer.beta1);
    s.get("beta2", cfg.optimizer.beta2);
    s.get("weight_decay", cfg.optimizer.weight_decay);
    s.get("lr_final", cfg.optimizer.lr_final);
    s.get("warmup_steps", cfg.optimizer.warmup_steps);
    s.finish();
  }
  if (root.contains("task")) {
    Section s(root.at("task"), "task");
    s.get("frames_per_symbol", cfg.task.frames_per_symbol);
    s.get("noise_std", cfg.task.noise_std);
    s.get("min_len", cfg.task.min_len);
    s.get("max_len", cfg.task.max_len);
    s.get("freq_masks", cfg.augment.freq_masks);
    s.get("freq_width_max", cfg.augment.freq_width_max);
    s.get("time_masks", cfg.augment.time_masks);
    s.get("time_width_max", cfg.augment.time_width_max);
    s.finish();
  }
  if (root.contains("train")) {
    Section s(root.at("train"), "train");
    s.get("steps", cfg.train.steps);
    s.get("batch_size", cfg.train.batch_size);
    s.get("seed", cfg.train.seed);
    s.get("eval_every", cfg.train.eval_every);
    s.get("eval_set_size", cfg.train.eval_set_size);
    s.finish();
  }

  cfg.validate();
  return cfg;
}

FullConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  NMM_CHECK(in.good(), ConfigError, "config: cannot open '" << path << "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const FullConfig& cfg) {
  json root;
  root["model"] = {{"C", cfg.model.channels},
                   {"R", cfg.model.blocks_per_tower},
                   {"k", cfg.model.kernel_size},
                   {"towers", cfg.model.towers},
                   {"vocab", cfg.model.vocab_size},
                   {"feature_dim", cfg.model.feature_dim},
                   {"tower_dropout_p", cfg.model.tower_dropout_p},
                   {"dropout_p", cfg.model.dropout_p},
                   {"se_reduction", cfg.model.se_reduction}};
  root["optimizer"] = {{"lr_init", cfg.optimizer.lr_init},
                       {"beta1", cfg.optimizer.beta1},
                       {"beta2", cfg.optimizer.beta2},
                       {"weight_decay", cfg.optimizer.weight_decay},
                       {"lr_final", cfg.optimizer.lr_final},
                       {"warmup_steps", cfg.optimizer.warmup_steps}};
  root["task"] = {{"frames_per_symbol", cfg.task.frames_per_symbol},
                  {"noise_std", cfg.task.noise_std},
                  {"min_len", cfg.task.min_len},
                  {"max_len", cfg.task.max_len},
                  {"freq_masks", cfg.augment.freq_masks},
                  {"freq_width_max", cfg.augment.freq_width_max},
                  {"time_masks", cfg.augment.time_masks},
                  {"time_width_max", cfg.augment.time_width_max}};
  root["train"] = {{"steps", cfg.train.steps},
                   {"batch_size", cfg.train.batch_size},
                   {"seed", cfg.train.seed},
                   {"eval_every", cfg.train.eval_every},
                   {"eval_set_size", cfg.train.eval_set_size}};
  return root.dump(2) + "\n";
}

}  // namespace nmm
