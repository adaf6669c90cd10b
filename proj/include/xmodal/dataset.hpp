// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "xmodal/tensor.hpp"
#include "xmodal/types.hpp"

namespace xmodal {

// Synthetic multimodal data with known cross-modal structure: every class has
// a latent mean, every example a latent point, and each modality observes the
// latent through a fixed random linear map plus modality-specific noise. All
// three modalities share latent content by construction, so cross-modal
// transfer is learnable and checkable.

struct TokenShape {
  int count = 0;  // tokens per example
  int width = 0;  // raw feature width
};

struct DatasetSpec {
  int num_base_classes = 20;
  int num_novel_classes = 8;
  int examples_per_base_class = 60;
  int examples_per_novel_class = 40;
  int latent_dim = 16;
  std::array<TokenShape, 3> token_shapes{};   // indexed by Modality
  std::array<double, 3> noise_scales{};       // per-modality observation noise
  double mu_scale = 0.4;                      // class-mean magnitude in latent space
  double class_spread = 0.3;                  // latent spread within a class
  double clip_noise = 0.15;                   // correlated noise shared by a clip
  int unlabeled_pool_size = 2000;
  int clip_group = 4;                         // examples per source clip
  double base_test_fraction = 0.25;
  std::uint64_t seed = 1;

  const TokenShape& shape(Modality m) const { return token_shapes[static_cast<int>(m)]; }
  double noise(Modality m) const { return noise_scales[static_cast<int>(m)]; }

  static DatasetSpec desk_default();
  void validate() const;
};

enum class Split : int { kBaseTrain = 0, kBaseTest = 1, kNovel = 2, kUnlabeled = 3 };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct ExampleRecord {
  std::string id;
  std::string clip_id;
  std::optional<std::string> label;       // class name; absent for the unlabeled pool
  Split split = Split::kUnlabeled;
  std::array<std::string, 3> files{};     // relative tensor paths per modality
};

struct Manifest {
  int schema_version = 1;
  std::vector<std::string> base_classes;
  std::vector<std::string> novel_classes;
  std::vector<ExampleRecord> examples;
};

DatasetSpec dataset_spec_from_json_text(const std::string& text);
DatasetSpec load_dataset_spec(const std::string& path);
std::string dataset_spec_to_json_text(const DatasetSpec& spec);

// Writes manifest.json plus {example_id}/{modality}.mmgt tensors. The manifest
// is written last, atomically (temp file + rename). Pure function of the spec.
void generate_synthetic(const DatasetSpec& spec, const std::string& out_dir);

// The exact linear map the generator used for a modality ([T*W x latent]),
// reproducible from the spec. Exposed so ground-truth recovery is testable.
Tensor generator_modality_map(const DatasetSpec& spec, Modality m);
Tensor generator_class_mean(const DatasetSpec& spec, int class_index);  // base then novel

struct SplitViolation {
  std::string type;  // "class-overlap" | "clip-overlap" | "example-overlap"
  std::string detail;
};

// Checks (a) base/novel class tables are disjoint, (b) no clip id appears in
// both a base split and novel, (c) base-train and base-test share no example.
std::vector<SplitViolation> validate_splits(const Manifest& manifest);

class Dataset {
 public:
  static Dataset load(const std::string& dir);

  const Manifest& manifest() const { return manifest_; }
  const std::string& root() const { return root_; }

  int size() const { return static_cast<int>(manifest_.examples.size()); }
  const ExampleRecord& example(int idx) const;
  const std::vector<int>& split_indices(Split s) const;

  int num_base_classes() const { return static_cast<int>(manifest_.base_classes.size()); }
  int num_novel_classes() const { return static_cast<int>(manifest_.novel_classes.size()); }

  // Class index inside the split's class table; -1 for unlabeled examples.
  int label_index(int idx) const;

  // Lazily reads and caches one modality's tokens; every read is recorded in
  // the access log so data-isolation contracts can be asserted.
  Tensor tokens(int idx, Modality m) const;

  // Shape probe (tokens x width) from the first example's file; not logged.
  TokenShape token_shape(Modality m) const;

  // Example indices grouped by class, in manifest order.
  const std::vector<std::vector<int>>& by_class(Split s) const;

  void prefetch(Split s) const;

  using AccessLog = std::map<std::pair<Split, Modality>, long>;
  AccessLog access_log() const;
  void reset_access_log() const;

 private:
  std::string root_;
  Manifest manifest_;
  std::array<std::vector<int>, 4> split_indices_;
  std::array<std::vector<std::vector<int>>, 4> by_class_;
  std::vector<int> label_index_;

  struct Cache {
    std::mutex mu;
    std::map<std::pair<int, int>, Tensor> tensors;
    AccessLog log;
  };
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

}  // namespace xmodal
