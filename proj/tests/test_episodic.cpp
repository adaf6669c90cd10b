// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "test_support.hpp"
#include "xmodal/dataset.hpp"
#include "xmodal/episodic.hpp"
#include "xmodal/errors.hpp"

namespace fs = std::filesystem;
using namespace xmodal;

namespace {

const Dataset& shared_dataset() {
  static Dataset ds = [] {
    DatasetSpec spec = DatasetSpec::desk_default();
    spec.num_base_classes = 8;
    spec.num_novel_classes = 6;
    spec.examples_per_base_class = 14;
    spec.examples_per_novel_class = 12;
    spec.unlabeled_pool_size = 8;
    spec.seed = 99;
    const fs::path dir = fs::temp_directory_path() / "xmodal_test_episodic";
    fs::remove_all(dir);
    generate_synthetic(spec, dir.string());
    return Dataset::load(dir.string());
  }();
  return ds;
}

ModelConfig small_model_config() {
  ModelConfig mc;
  mc.encoder = EncoderConfig::desk_default();
  mc.encoder.depth = 1;
  mc.encoder.heads = 2;
  mc.encoder.dim = 16;
  mc.fusion.depth = 1;
  mc.fusion.heads = 2;
  mc.fusion.dim = 16;
  return mc;
}

}  // namespace

TEST_CASE("episode sampling arithmetic and relabeling") {
  const Dataset& ds = shared_dataset();
  EpisodeSpec spec;
  spec.n_way = 5;
  spec.k_shot = 5;
  spec.q_queries = 5;
  Rng rng(1);
  const Episode ep = sample_episode(ds, spec, rng);
  CHECK(ep.support.size() == 25);
  CHECK(ep.query.size() == 25);
  CHECK(ep.class_table.size() == 5);

  std::set<int> distinct(ep.class_table.begin(), ep.class_table.end());
  CHECK(distinct.size() == 5);
  std::set<int> labels;
  for (const EpisodeExample& e : ep.support) labels.insert(e.label);
  for (const EpisodeExample& e : ep.query) labels.insert(e.label);
  CHECK(labels == std::set<int>{0, 1, 2, 3, 4});

  // relabel is consistent with the class table
  for (const EpisodeExample& e : ep.support)
    CHECK(ds.label_index(e.dataset_index) == ep.class_table[e.label]);
}

TEST_CASE("masks are enforced at the data level") {
  const Dataset& ds = shared_dataset();
  EpisodeSpec spec;
  spec.n_way = 3;
  spec.k_shot = 2;
  spec.q_queries = 2;
  spec.support_mask = ModalityMask::parse("audio,imu");
  spec.query_mask = ModalityMask::parse("video");
  Rng rng(2);
  const Episode ep = sample_episode(ds, spec, rng);
  for (const EpisodeExample& e : ep.support) {
    CHECK(e.tokens.count(Modality::kAudio) == 1);
    CHECK(e.tokens.count(Modality::kImu) == 1);
    CHECK(e.tokens.count(Modality::kVideo) == 0);
  }
  for (const EpisodeExample& e : ep.query) {
    CHECK(e.tokens.count(Modality::kVideo) == 1);
    CHECK(e.tokens.count(Modality::kAudio) == 0);
    CHECK(e.tokens.count(Modality::kImu) == 0);
  }
}

TEST_CASE("identical rng streams give identical episodes") {
  const Dataset& ds = shared_dataset();
  EpisodeSpec spec;
  spec.n_way = 4;
  spec.k_shot = 3;
  spec.q_queries = 2;
  Rng r1(77), r2(77);
  const Episode a = sample_episode(ds, spec, r1);
  const Episode b = sample_episode(ds, spec, r2);
  REQUIRE(a.support.size() == b.support.size());
  for (std::size_t i = 0; i < a.support.size(); ++i) CHECK(a.support[i].id == b.support[i].id);
  for (std::size_t i = 0; i < a.query.size(); ++i) CHECK(a.query[i].id == b.query[i].id);
}

TEST_CASE("insufficient pools are rejected with counts") {
  const Dataset& ds = shared_dataset();
  EpisodeSpec spec;
  spec.n_way = 7;  // only 6 novel classes
  Rng rng(3);
  try {
    sample_episode(ds, spec, rng);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("6") != std::string::npos);
    CHECK(msg.find("7") != std::string::npos);
  }

  EpisodeSpec too_many;
  too_many.n_way = 2;
  too_many.k_shot = 10;
  too_many.q_queries = 5;  // 15 > 12 examples per novel class
  CHECK_THROWS_AS(sample_episode(ds, too_many, rng), DataError);

  EpisodeSpec bad;
  bad.n_way = 1;
  CHECK_THROWS_AS(sample_episode(ds, bad, rng), ConfigError);
}

TEST_CASE("support and query never overlap across many episodes") {
  const Dataset& ds = shared_dataset();
  EpisodeSpec spec;
  spec.n_way = 4;
  spec.k_shot = 4;
  spec.q_queries = 4;
  int violations = 0;
  for (int e = 0; e < 2000; ++e) {
    Rng rng(mix_seed(5000, static_cast<std::uint64_t>(e)));
    const Episode ep = sample_episode(ds, spec, rng);
    std::set<std::string> support_ids;
    for (const EpisodeExample& ex : ep.support) support_ids.insert(ex.id);
    for (const EpisodeExample& ex : ep.query)
      if (support_ids.count(ex.id)) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("finetune evaluation contract") {
  const Dataset& ds = shared_dataset();
  const Model model = build_model(small_model_config(), ds.num_base_classes(), 11);
  EpisodeSpec spec;
  spec.n_way = 3;
  spec.k_shot = 2;
  spec.q_queries = 2;
  Rng rng(5);
  const Episode ep = sample_episode(ds, spec, rng);

  SUBCASE("steps are counted and steps=0 is rejected") {
    FinetuneConfig cfg;
    cfg.steps = 1;
    const EpisodeEvalResult r = fewshot_finetune_eval(model, ep, cfg);
    CHECK(r.steps_run == 1);
    FinetuneConfig zero;
    zero.steps = 0;
    CHECK_THROWS_AS(fewshot_finetune_eval(model, ep, zero), ConfigError);
  }

  SUBCASE("base model parameters are bit-identical afterwards, both scopes") {
    for (auto scope : {FinetuneConfig::Scope::kHeadOnly, FinetuneConfig::Scope::kHeadAndFusion}) {
      Model copy = model;
      FinetuneConfig cfg;
      cfg.steps = 3;
      cfg.scope = scope;
      fewshot_finetune_eval(copy, ep, cfg);
      REQUIRE(copy.params.size() == model.params.size());
      for (const auto& [name, tensor] : model.params)
        CHECK(copy.params.at(name).bit_equal(tensor));
    }
  }

  SUBCASE("accuracy lies in [0,1]") {
    FinetuneConfig cfg;
    const EpisodeEvalResult r = fewshot_finetune_eval(model, ep, cfg);
    CHECK(r.accuracy >= 0.0);
    CHECK(r.accuracy <= 1.0);
  }

  SUBCASE("episode/model width mismatch is an error") {
    ModelConfig wrong = small_model_config();
    wrong.encoder.shape(Modality::kVideo).input_width += 1;
    const Model bad = build_model(wrong, ds.num_base_classes(), 12);
    FinetuneConfig cfg;
    CHECK_THROWS_AS(fewshot_finetune_eval(bad, ep, cfg), DataError);
  }
}

TEST_CASE("noise-free episodes with oracle features score 1.0") {
  DatasetSpec spec = DatasetSpec::desk_default();
  spec.num_base_classes = 4;
  spec.num_novel_classes = 6;
  spec.examples_per_base_class = 8;
  spec.examples_per_novel_class = 12;
  spec.unlabeled_pool_size = 4;
  spec.noise_scales = {0.0, 0.0, 0.0};
  spec.class_spread = 0.0;
  spec.clip_noise = 0.0;
  spec.seed = 123;
  const fs::path dir = fs::temp_directory_path() / "xmodal_test_oracle_eps";
  fs::remove_all(dir);
  generate_synthetic(spec, dir.string());
  const Dataset ds = Dataset::load(dir.string());

  // oracle embedding: the raw video tokens, flattened
  EmbedFn embed = [](const TokensByModality& tokens, const ModalityMask& mask) {
    if (!mask.has(Modality::kVideo)) throw DataError("oracle embed expects video");
    const Tensor& t = tokens.at(Modality::kVideo);
    std::vector<double> v(t.data(), t.data() + t.size());
    const int n = static_cast<int>(v.size());
    return Tensor({n}, std::move(v));
  };
  EpisodeSpec es;
  es.n_way = 5;
  es.k_shot = 5;
  es.q_queries = 5;
  FinetuneConfig ft;
  ft.steps = 40;
  ft.lr = 0.05;
  const SuiteResult r = run_fewshot_suite(embed, ds, es, ft, 20, 42);
  CHECK(r.mean_accuracy == doctest::Approx(1.0));
}

// Calibration null: with mu_scale 0 every class shares one latent
// distribution, so no features can predict labels and any systematic deviation
// from 1/N would expose support/query leakage in the evaluator. A random
// model on class-structured data is NOT at chance: random projections keep
// the latent signal and the finetuned head picks it up.
TEST_CASE("the evaluator is calibrated: no-signal data scores 1/N") {
  DatasetSpec spec = DatasetSpec::desk_default();
  spec.num_base_classes = 6;
  spec.num_novel_classes = 6;
  spec.examples_per_base_class = 8;
  spec.examples_per_novel_class = 12;
  spec.unlabeled_pool_size = 4;
  spec.mu_scale = 0.0;
  spec.seed = 1717;
  const fs::path dir = fs::temp_directory_path() / "xmodal_test_chance_eps";
  fs::remove_all(dir);
  generate_synthetic(spec, dir.string());
  const Dataset ds = Dataset::load(dir.string());

  const Model model = build_model(small_model_config(), ds.num_base_classes(), 17);
  EpisodeSpec es;
  es.n_way = 5;
  es.k_shot = 3;
  es.q_queries = 3;
  FinetuneConfig ft;
  const SuiteResult r = run_fewshot_suite(model, ds, es, ft, 150, 7);
  const double se = std::sqrt(0.2 * 0.8 / (150.0 * 15.0));
  CHECK(std::fabs(r.mean_accuracy - 0.2) <= 4.0 * se);
}

TEST_CASE("a random model beats chance on structured data (random features learn)") {
  const Dataset& ds = shared_dataset();
  const Model model = build_model(small_model_config(), ds.num_base_classes(), 17);
  EpisodeSpec spec;
  spec.n_way = 5;
  spec.k_shot = 3;
  spec.q_queries = 3;
  FinetuneConfig ft;
  const SuiteResult r = run_fewshot_suite(model, ds, spec, ft, 60, 7);
  CHECK(r.mean_accuracy > 0.25);
}

TEST_CASE("suite results are independent of the worker count") {
  const Dataset& ds = shared_dataset();
  const Model model = build_model(small_model_config(), ds.num_base_classes(), 19);
  EpisodeSpec spec;
  spec.n_way = 3;
  spec.k_shot = 2;
  spec.q_queries = 2;
  FinetuneConfig ft;
  ft.steps = 5;
  const SuiteResult serial = run_fewshot_suite(model, ds, spec, ft, 24, 555, 1);
  const SuiteResult parallel = run_fewshot_suite(model, ds, spec, ft, 24, 555, 4);
  CHECK(serial.mean_accuracy == parallel.mean_accuracy);
  CHECK(serial.ci95 == parallel.ci95);

  const SuiteResult repeat = run_fewshot_suite(model, ds, spec, ft, 24, 555, 1);
  CHECK(serial.mean_accuracy == repeat.mean_accuracy);
}

TEST_CASE("single-episode suites report a degenerate interval") {
  const Dataset& ds = shared_dataset();
  const Model model = build_model(small_model_config(), ds.num_base_classes(), 23);
  EpisodeSpec spec;
  spec.n_way = 3;
  spec.k_shot = 2;
  spec.q_queries = 2;
  FinetuneConfig ft;
  ft.steps = 2;
  const SuiteResult r = run_fewshot_suite(model, ds, spec, ft, 1, 9);
  CHECK(r.episodes == 1);
  CHECK(r.ci95 == 0.0);
  CHECK(r.degenerate_ci);
}
