// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "test_support.hpp"
#include "xmodal/checkpoint.hpp"
#include "xmodal/cli.hpp"
#include "xmodal/config.hpp"
#include "xmodal/dataset.hpp"
#include "xmodal/errors.hpp"
#include "xmodal/pipeline.hpp"
#include "xmodal/report.hpp"

namespace fs = std::filesystem;
using namespace xmodal;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("xmodal_test_orch_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const std::string& shared_data_dir() {
  static std::string dir = [] {
    DatasetSpec spec = DatasetSpec::desk_default();
    spec.num_base_classes = 6;
    spec.num_novel_classes = 5;
    spec.examples_per_base_class = 12;
    spec.examples_per_novel_class = 10;
    spec.unlabeled_pool_size = 24;
    spec.seed = 31;
    const fs::path p = fs::temp_directory_path() / "xmodal_test_orch_data";
    fs::remove_all(p);
    generate_synthetic(spec, p.string());
    return p.string();
  }();
  return dir;
}

// Tiny shapes and one-pass stages keep pipeline tests quick.
RunConfig tiny_config() {
  RunConfig cfg = RunConfig::defaults();
  cfg.model.encoder.depth = 1;
  cfg.model.encoder.heads = 2;
  cfg.model.encoder.dim = 12;
  cfg.model.fusion.depth = 1;
  cfg.model.fusion.heads = 2;
  cfg.model.fusion.dim = 12;
  cfg.unimodal = {1, 16, 1e-3, 24};
  cfg.unsupervised = {1, 8, 1e-3, 16};
  cfg.multimodal = {1, 16, 1e-3, 24};
  cfg.meta.episodes = 4;
  cfg.meta.n_way = 3;
  cfg.meta.k_shot = 2;
  cfg.meta.q_queries = 2;
  cfg.fewshot_eval.n_way = 3;
  cfg.fewshot_eval.k_shot = 2;
  cfg.fewshot_eval.q_queries = 2;
  cfg.fewshot_eval.episodes = 4;
  cfg.fewshot_eval.finetune.steps = 4;
  return cfg;
}

}  // namespace

TEST_CASE("pipeline stage sequences match the training matrix for all six pairs") {
  using K = StageKind;
  const std::vector<K> sup{K::kUnimodalPretrain, K::kMultimodalSupervised};
  const std::vector<K> zs{K::kUnsupervisedPretrain, K::kMultimodalSupervised};
  const std::vector<K> few{K::kUnimodalPretrain, K::kMultimodalSupervised, K::kMetaTrain};

  CHECK(pipeline_stages(Setting::kSupervised, Task::kRegular) == sup);
  CHECK(pipeline_stages(Setting::kSupervised, Task::kMissing) == sup);
  CHECK(pipeline_stages(Setting::kSupervised, Task::kZeroshot) == zs);
  CHECK(pipeline_stages(Setting::kFewshot, Task::kRegular) == few);
  CHECK(pipeline_stages(Setting::kFewshot, Task::kMissing) == few);
  CHECK(pipeline_stages(Setting::kFewshot, Task::kZeroshot) == few);

  CHECK(std::string(stage_kind_name(K::kUnimodalPretrain)) == "unimodal-supervised-pretrain");
  CHECK(std::string(stage_kind_name(K::kUnsupervisedPretrain)) ==
        "multimodal-unsupervised-pretrain");
  CHECK(std::string(stage_kind_name(K::kMultimodalSupervised)) == "multimodal-supervised-train");
  CHECK(std::string(stage_kind_name(K::kMetaTrain)) == "multimodal-meta-train");
}

TEST_CASE("legal mask pairs per task") {
  CHECK(legal_mask_pairs(Task::kRegular).size() == 7);    // matched non-empty masks
  CHECK(legal_mask_pairs(Task::kMissing).size() == 12);   // strict subsets
  CHECK(legal_mask_pairs(Task::kZeroshot).size() == 12);  // disjoint pairs
  for (const auto& [s, q] : legal_mask_pairs(Task::kMissing)) {
    CHECK(q.subset_of(s));
    CHECK_FALSE(q == s);
  }
  for (const auto& [s, q] : legal_mask_pairs(Task::kZeroshot)) CHECK(s.disjoint_with(q));

  const ModalityMask va = ModalityMask::parse("video,audio");
  const ModalityMask vai = ModalityMask::all();
  CHECK_THROWS_AS(validate_mask_pair(Task::kMissing, {va, vai}), ConfigError);
  CHECK_NOTHROW(validate_mask_pair(Task::kMissing, {vai, va}));
  CHECK_THROWS_AS(validate_mask_pair(Task::kZeroshot, {va, vai}), ConfigError);
  CHECK_NOTHROW(validate_mask_pair(Task::kRegular, {va, va}));
}

TEST_CASE("config defaults, hashing and parsing") {
  const RunConfig cfg = RunConfig::defaults();
  CHECK(cfg.lambda_align == 0.5);
  CHECK(cfg.align.tau == 0.07);
  CHECK(cfg.drop.p == 0.6);
  CHECK(cfg.proto_distance == ProtoDistance::kSquaredL2);
  CHECK(cfg.fewshot_eval.finetune.steps == 20);
  CHECK(cfg.fewshot_eval.finetune.lr == 0.01);

  // hash is stable across dump/parse round trips
  const RunConfig back = RunConfig::from_json_text(cfg.to_json_text());
  CHECK(back.config_hash() == cfg.config_hash());

  // overrides change the hash
  RunConfig other = cfg;
  other.lambda_align = 0.0;
  CHECK(other.config_hash() != cfg.config_hash());

  CHECK_THROWS_AS(RunConfig::from_json_text("nonsense"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json_text("{\"losses\": {\"tau\": -1}}"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json_text("{\"drop\": {\"p\": 2.0}}"), ConfigError);
}

TEST_CASE("unsupervised pretraining reduces the alignment loss") {
  const Dataset ds = Dataset::load(shared_data_dir());
  RunConfig cfg = tiny_config();
  cfg.unsupervised = {3, 8, 2e-3, 16};
  for (Modality m : kAllModalities) {
    const TokenShape sh = ds.token_shape(m);
    cfg.model.encoder.shape(m) = {sh.width, sh.count};
  }
  Model model = build_model(cfg.model, ds.num_base_classes(), 5);
  Rng rng(5);
  StageContext ctx;
  const StageLog log = run_stage(StageKind::kUnsupervisedPretrain, model, ds, cfg, ctx, rng);
  CHECK(log.steps > 0);
  CHECK(log.final_loss < log.initial_loss);
}

TEST_CASE("lambda 0 reproduces the align-free stage bit for bit") {
  const Dataset ds = Dataset::load(shared_data_dir());
  RunConfig cfg = tiny_config();
  for (Modality m : kAllModalities) {
    const TokenShape sh = ds.token_shape(m);
    cfg.model.encoder.shape(m) = {sh.width, sh.count};
  }

  auto run_once = [&](bool with_align, double lambda) {
    RunConfig local = cfg;
    local.lambda_align = lambda;
    Model model = build_model(local.model, ds.num_base_classes(), 7);
    Rng rng(7);
    StageContext ctx;
    ctx.with_align = with_align;
    const StageLog log =
        run_stage(StageKind::kMultimodalSupervised, model, ds, local, ctx, rng);
    return std::make_pair(std::move(model), log);
  };

  auto [m_off, log_off] = run_once(false, 0.5);
  auto [m_zero, log_zero] = run_once(true, 0.0);
  CHECK(log_off.initial_loss == log_zero.initial_loss);
  CHECK(log_off.final_loss == log_zero.final_loss);
  for (const auto& [name, tensor] : m_off.params) CHECK(m_zero.params.at(name).bit_equal(tensor));

  // and a positive lambda changes the trajectory
  auto [m_on, log_on] = run_once(true, 0.5);
  CHECK(log_on.final_loss != log_off.final_loss);
}

TEST_CASE("meta training never touches novel data") {
  const Dataset ds = Dataset::load(shared_data_dir());
  RunConfig cfg = tiny_config();
  for (Modality m : kAllModalities) {
    const TokenShape sh = ds.token_shape(m);
    cfg.model.encoder.shape(m) = {sh.width, sh.count};
  }
  Model model = build_model(cfg.model, ds.num_base_classes(), 9);
  ds.reset_access_log();
  Rng rng(9);
  StageContext ctx;
  ctx.task = Task::kZeroshot;
  run_stage(StageKind::kMetaTrain, model, ds, cfg, ctx, rng);
  for (const auto& [key, count] : ds.access_log()) CHECK(key.first != Split::kNovel);
}

TEST_CASE("supervised zero-shot pipeline isolates the held-out modality") {
  const Dataset ds = Dataset::load(shared_data_dir());
  RunConfig cfg = tiny_config();
  ds.reset_access_log();
  const PipelineResult result = run_pipeline(Setting::kSupervised, Task::kZeroshot, ds, cfg, 3);

  // training stages must not read labeled video; evaluation may (base-test)
  const auto log = ds.access_log();
  const auto it = log.find({Split::kBaseTrain, Modality::kVideo});
  CHECK((it == log.end() || it->second == 0));
  CHECK(log.count({Split::kBaseTest, Modality::kVideo}));

  REQUIRE(result.record.stages.size() == 2);
  CHECK(result.record.stages[0] == "multimodal-unsupervised-pretrain");
  CHECK(result.record.stages[1] == "multimodal-supervised-train");
  REQUIRE(result.record.rows.size() == 1);
  CHECK(result.record.rows[0].train_mask.str() == "audio+imu");
  CHECK(result.record.rows[0].test_mask.str() == "video");
}

TEST_CASE("supervised eval behaves at chance for a random model and rejects empty masks") {
  const Dataset ds = Dataset::load(shared_data_dir());
  RunConfig cfg = tiny_config();
  for (Modality m : kAllModalities) {
    const TokenShape sh = ds.token_shape(m);
    cfg.model.encoder.shape(m) = {sh.width, sh.count};
  }
  const Model model = build_model(cfg.model, ds.num_base_classes(), 21);
  const double acc = supervised_eval(model, ds, ModalityMask::all());
  // 6 classes, 24 test examples: generous band around chance
  CHECK(acc >= 0.0);
  CHECK(acc <= 0.6);
  CHECK_THROWS_AS(supervised_eval(model, ds, ModalityMask{}), DataError);
}

TEST_CASE("a converged model memorizes a noise-free dataset") {
  DatasetSpec spec = DatasetSpec::desk_default();
  spec.num_base_classes = 4;
  spec.num_novel_classes = 2;
  spec.examples_per_base_class = 8;
  spec.examples_per_novel_class = 4;
  spec.unlabeled_pool_size = 4;
  spec.noise_scales = {0.0, 0.0, 0.0};
  spec.class_spread = 0.0;
  spec.clip_noise = 0.0;
  spec.mu_scale = 1.0;
  spec.seed = 77;
  const fs::path dir = temp_dir("memorize");
  generate_synthetic(spec, dir.string());
  const Dataset ds = Dataset::load(dir.string());

  RunConfig cfg = tiny_config();
  cfg.drop.p = 0.0;
  cfg.multimodal = {30, 32, 5e-3, 0};
  for (Modality m : kAllModalities) {
    const TokenShape sh = ds.token_shape(m);
    cfg.model.encoder.shape(m) = {sh.width, sh.count};
  }
  Model model = build_model(cfg.model, ds.num_base_classes(), 13);
  Rng rng(13);
  StageContext ctx;
  run_stage(StageKind::kMultimodalSupervised, model, ds, cfg, ctx, rng);
  // base-test duplicates base-train content exactly at zero noise
  CHECK(supervised_eval(model, ds, ModalityMask::all()) == doctest::Approx(1.0));
}

TEST_CASE("checkpoints round-trip the model and its config") {
  const Dataset ds = Dataset::load(shared_data_dir());
  RunConfig cfg = tiny_config();
  for (Modality m : kAllModalities) {
    const TokenShape sh = ds.token_shape(m);
    cfg.model.encoder.shape(m) = {sh.width, sh.count};
  }
  const Model model = build_model(cfg.model, ds.num_base_classes(), 15);
  const fs::path dir = temp_dir("ckpt");
  const std::string path = (dir / "model.mmgc").string();
  const CheckpointMeta meta{cfg.config_hash(), cfg.to_json_text()};
  save_checkpoint(path, model, meta);

  CheckpointMeta back_meta;
  const Model back = load_checkpoint(path, &back_meta);
  CHECK(back_meta.config_hash == meta.config_hash);
  CHECK(back_meta.config_json == meta.config_json);
  CHECK(back.num_classes == model.num_classes);
  CHECK(back.cfg.encoder.dim == model.cfg.encoder.dim);
  REQUIRE(back.params.size() == model.params.size());
  for (const auto& [name, tensor] : model.params) CHECK(back.params.at(name).bit_equal(tensor));

  // corrupted magic rejected
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << "NOPE";
  }
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
}

TEST_CASE("results files: stable csv, json round-trip") {
  RunRecord r;
  r.setting = "supervised";
  r.task = "missing";
  r.stages = {"unimodal-supervised-pretrain", "multimodal-supervised-train"};
  r.config_hash = 0xabcdef0123456789ull;
  r.seed = 42;
  r.stage_logs = {{"unimodal-supervised-pretrain", 10, 2.0, 1.0}};
  r.rows = {{ModalityMask::all(), ModalityMask::parse("video,audio"), "top1", 0.625, 0.0},
            {ModalityMask::all(), ModalityMask::parse("imu"), "top1", 0.25, 0.0}};
  r.wall_time_sec = 1.5;

  const std::string csv = results_csv({r});
  CHECK(csv ==
        "setting,task,train_mask,test_mask,metric,value,ci,seed,config_hash\n"
        "supervised,missing,video+audio+imu,video+audio,top1,0.625000,0.000000,42,"
        "abcdef0123456789\n"
        "supervised,missing,video+audio+imu,imu,top1,0.250000,0.000000,42,abcdef0123456789\n");
  CHECK(results_csv({r}) == csv);  // byte-stable

  const std::vector<RunRecord> back = results_from_json_text(results_json_text({r}));
  REQUIRE(back.size() == 1);
  CHECK(back[0] == r);

  const fs::path dir = temp_dir("report");
  write_results({r}, (dir / "a").string());
  write_results({r}, (dir / "b").string());
  const auto merged = merge_results(dir.string(), (dir / "merged").string());
  CHECK(merged.size() == 2);
  CHECK(fs::exists(dir / "merged" / "results.csv"));
}

TEST_CASE("cli contract") {
  SUBCASE("no arguments prints help and exits 1") { CHECK(run_cli({}) == 1); }

  SUBCASE("unknown flags are usage errors") {
    CHECK(run_cli({"run", "--bogus"}) == 1);
  }

  SUBCASE("gen-synth, run, eval round trip") {
    const fs::path dir = temp_dir("cli");
    const std::string data = (dir / "data").string();
    const std::string out = (dir / "out").string();

    DatasetSpec spec = DatasetSpec::desk_default();
    spec.num_base_classes = 5;
    spec.num_novel_classes = 4;
    spec.examples_per_base_class = 10;
    spec.examples_per_novel_class = 8;
    spec.unlabeled_pool_size = 10;
    spec.seed = 3;
    const std::string spec_path = (dir / "spec.json").string();
    {
      std::ofstream os(spec_path);
      os << dataset_spec_to_json_text(spec);
    }
    CHECK(run_cli({"gen-synth", "--spec", spec_path, "--out", data}) == 0);

    const std::string cfg_path = (dir / "config.json").string();
    {
      RunConfig cfg = tiny_config();
      std::ofstream os(cfg_path);
      os << cfg.to_json_text();
    }
    CHECK(run_cli({"run", "--setting", "supervised", "--task", "regular", "--data", data,
                   "--config", cfg_path, "--seed", "1", "--out", out}) == 0);
    CHECK(fs::exists(fs::path(out) / "checkpoint.mmgc"));
    CHECK(fs::exists(fs::path(out) / "results.csv"));
    CHECK(fs::exists(fs::path(out) / "results.json"));

    const std::string ckpt = (fs::path(out) / "checkpoint.mmgc").string();
    CHECK(run_cli({"eval-supervised", "--checkpoint", ckpt, "--data", data, "--test-mask",
                   "video,audio"}) == 0);
    CHECK(run_cli({"eval-fewshot", "--checkpoint", ckpt, "--data", data, "--episodes", "2",
                   "--support-mask", "video,audio", "--query-mask", "video"}) == 0);

    // missing-modality task rejects a query mask that is not a strict subset
    CHECK(run_cli({"eval-fewshot", "--checkpoint", ckpt, "--data", data, "--episodes", "2",
                   "--support-mask", "video,audio", "--query-mask", "video,audio,imu", "--task",
                   "missing"}) == 1);

    // report merges the run output
    CHECK(run_cli({"report", "--in", out, "--out", (dir / "merged").string()}) == 0);
    CHECK(fs::exists(dir / "merged" / "results.csv"));

    // bad dataset path is a data error
    CHECK(run_cli({"run", "--setting", "supervised", "--task", "regular", "--data",
                   (dir / "nope").string(), "--config", cfg_path, "--seed", "1", "--out", out}) ==
          2);
  }
}

TEST_CASE("fewshot pipeline produces episodic rows with intervals") {
  const Dataset ds = Dataset::load(shared_data_dir());
  RunConfig cfg = tiny_config();
  const PipelineResult result = run_pipeline(Setting::kFewshot, Task::kZeroshot, ds, cfg, 11);
  REQUIRE(result.record.stages.size() == 3);
  CHECK(result.record.stages[2] == "multimodal-meta-train");
  REQUIRE(result.record.rows.size() == cfg.fewshot_zeroshot_pairs.size());
  for (const EvalRow& row : result.record.rows) {
    CHECK(row.metric == "fewshot-top1");
    CHECK(row.train_mask.disjoint_with(row.test_mask));
    CHECK(row.value >= 0.0);
    CHECK(row.value <= 1.0);
  }
}
