// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "xmodal/dataset.hpp"
#include "xmodal/model.hpp"
#include "xmodal/rng.hpp"
#include "xmodal/types.hpp"

namespace xmodal {

struct EpisodeSpec {
  int n_way = 5;
  int k_shot = 5;
  int q_queries = 5;
  ModalityMask support_mask = ModalityMask::all();
  ModalityMask query_mask = ModalityMask::all();
  Split class_pool = Split::kNovel;

  void validate() const;
};

struct EpisodeExample {
  int dataset_index = -1;
  std::string id;
  int label = -1;               // relabeled to 0..N-1
  TokensByModality tokens;      // only the masked-in modalities are materialized
};

struct Episode {
  std::vector<EpisodeExample> support;
  std::vector<EpisodeExample> query;
  std::vector<int> class_table;  // relabeled class -> original class index
  ModalityMask support_mask;
  ModalityMask query_mask;
};

// Classes drawn without replacement from the pool, then K+Q examples without
// replacement per class (first K support, next Q query, so ids never overlap).
// Masking happens at the data level: tokens outside a mask never exist in the
// episode, so no downstream path can see a forbidden modality.
Episode sample_episode(const Dataset& ds, const EpisodeSpec& spec, Rng& rng);

struct FinetuneConfig {
  int steps = 20;
  double lr = 1e-2;
  enum class Scope { kHeadOnly, kHeadAndFusion };
  Scope scope = Scope::kHeadOnly;

  void validate() const;  // steps >= 1
};

FinetuneConfig::Scope finetune_scope_from_name(const std::string& name);

struct EpisodeEvalResult {
  double accuracy = 0.0;
  int steps_run = 0;
};

// Pure feature extractor for one example under a mask; must be thread-safe.
using EmbedFn = std::function<Tensor(const TokensByModality&, const ModalityMask&)>;

// Finetune-based evaluation with a frozen embedding: a fresh N-way linear head
// is trained on the support features and classifies the queries.
EpisodeEvalResult fewshot_finetune_eval(const EmbedFn& embed, const Episode& episode,
                                        const FinetuneConfig& cfg);

// Model-aware variant honoring cfg.scope. kHeadAndFusion finetunes a private
// copy of the fusion parameters through the graph; the base model is left
// bit-identical either way.
EpisodeEvalResult fewshot_finetune_eval(const Model& model, const Episode& episode,
                                        const FinetuneConfig& cfg);

struct SuiteResult {
  double mean_accuracy = 0.0;
  double ci95 = 0.0;
  int episodes = 0;
  bool degenerate_ci = false;  // single-episode suite
};

// Episode i uses an independent stream derived from (base_seed, i); results
// land in an index-addressed array and reduce in fixed order, so the worker
// count never changes the outcome.
SuiteResult run_fewshot_suite(const EmbedFn& embed, const Dataset& ds, const EpisodeSpec& spec,
                              const FinetuneConfig& ft, int num_episodes,
                              std::uint64_t base_seed, int workers = 1);

SuiteResult run_fewshot_suite(const Model& model, const Dataset& ds, const EpisodeSpec& spec,
                              const FinetuneConfig& ft, int num_episodes,
                              std::uint64_t base_seed, int workers = 1);

}  // namespace xmodal
