// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xmodal/config.hpp"
#include "xmodal/dataset.hpp"
#include "xmodal/model.hpp"

namespace xmodal {

enum class StageKind {
  kUnimodalPretrain,
  kUnsupervisedPretrain,
  kMultimodalSupervised,
  kMetaTrain,
};

const char* stage_kind_name(StageKind k);

// The six-pipeline matrix. Supervised regular/missing share
// [unimodal CE -> multimodal CE+align]; supervised zero-shot runs
// [unsupervised align -> multimodal CE (restricted, no align)]; every few-shot
// task runs [unimodal CE -> multimodal CE+align -> meta proto].
std::vector<StageKind> pipeline_stages(Setting setting, Task task);

// Mask pairs an episode may legally use for a task: regular = matched masks,
// missing = strict subset queries, zero-shot = disjoint masks.
std::vector<MaskPair> legal_mask_pairs(Task task);
void validate_mask_pair(Task task, const MaskPair& pair);  // throws UsageError-style ConfigError

struct StageLog {
  std::string stage;
  int steps = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

struct EvalRow {
  ModalityMask train_mask;
  ModalityMask test_mask;
  std::string metric;  // "top1" | "fewshot-top1"
  double value = 0.0;
  double ci = 0.0;
};

struct RunRecord {
  std::string setting;
  std::string task;
  std::vector<std::string> stages;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::vector<StageLog> stage_logs;
  std::vector<EvalRow> rows;
  double wall_time_sec = 0.0;
};

struct StageContext {
  Setting setting = Setting::kSupervised;
  Task task = Task::kRegular;
  bool with_align = false;                         // CE stage: add lambda * L_align
  ModalityMask stage_mask = ModalityMask::all();   // labeled-data modality restriction
};

// Runs one training stage in place. Deterministic given the rng stream; training
// stages never read novel-class data (asserted via the dataset access log).
StageLog run_stage(StageKind kind, Model& model, const Dataset& ds, const RunConfig& cfg,
                   const StageContext& ctx, Rng& rng);

// Top-1 accuracy of the fused classifier over base-test under a mask.
double supervised_eval(const Model& model, const Dataset& ds, const ModalityMask& test_mask);

struct PipelineResult {
  RunRecord record;
  Model model;
};

PipelineResult run_pipeline(Setting setting, Task task, const Dataset& ds, const RunConfig& cfg,
                            std::uint64_t seed);

// One few-shot evaluation row against an existing model.
EvalRow fewshot_eval_row(const Model& model, const Dataset& ds, const RunConfig& cfg,
                         const MaskPair& pair, int episodes, std::uint64_t seed);

}  // namespace xmodal
