// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "xmodal/episodic.hpp"
#include "xmodal/losses.hpp"
#include "xmodal/model.hpp"

namespace xmodal {

enum class Setting { kSupervised, kFewshot };
enum class Task { kRegular, kMissing, kZeroshot };

const char* setting_name(Setting s);
const char* task_name(Task t);
Setting setting_from_name(const std::string& name);
Task task_from_name(const std::string& name);

struct StageHyper {
  int epochs = 1;
  int batch = 32;
  double lr = 1e-3;
  int max_examples = 0;  // 0 = use the whole split
};

struct MetaHyper {
  int episodes = 2000;
  int n_way = 5;
  int k_shot = 5;
  int q_queries = 5;
  double lr = 1e-4;
};

struct FewshotEvalConfig {
  int n_way = 5;
  int k_shot = 5;
  int q_queries = 5;
  int episodes = 500;  // desk default; full-scale averaging uses 10000
  FinetuneConfig finetune;
};

using MaskPair = std::pair<ModalityMask, ModalityMask>;

// Resolved run configuration. JSON schema mirrors the field names below; every
// key is optional and falls back to these defaults. See README for the schema.
struct RunConfig {
  ModelConfig model;  // encoder token shapes are overwritten from the dataset

  double lambda_align = 0.5;
  AlignConfig align;
  DropConfig drop;
  ProtoDistance proto_distance = ProtoDistance::kSquaredL2;

  StageHyper unimodal{10, 32, 1e-3};
  StageHyper unsupervised{3, 16, 1e-3};
  StageHyper multimodal{15, 32, 1e-3};
  MetaHyper meta;

  ModalityMask zeroshot_train_mask{false, true, true};  // audio+imu
  std::vector<ModalityMask> zeroshot_test_masks{{true, false, false}};

  std::vector<ModalityMask> missing_test_masks;  // defaults: all strict subsets
  std::vector<MaskPair> fewshot_zeroshot_pairs;  // defaults mirror the benchmark rows

  FewshotEvalConfig fewshot_eval;
  int eval_workers = 1;
  std::vector<std::string> freeze;  // parameter-name prefixes excluded from updates

  static RunConfig defaults();
  static RunConfig from_json_text(const std::string& text);
  static RunConfig load(const std::string& path);
  std::string to_json_text() const;  // canonical dump (resolved values)
  std::uint64_t config_hash() const;

  void validate() const;
};

std::string proto_distance_name(ProtoDistance d);
ProtoDistance proto_distance_from_name(const std::string& name);

}  // namespace xmodal
