// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/cli.hpp"

#include <cstdio>
#include <filesystem>

#include <CLI11.hpp>

#include "xmodal/checkpoint.hpp"
#include "xmodal/config.hpp"
#include "xmodal/dataset.hpp"
#include "xmodal/errors.hpp"
#include "xmodal/pipeline.hpp"
#include "xmodal/report.hpp"

namespace fs = std::filesystem;

namespace xmodal {

namespace {

Task infer_task(const ModalityMask& support, const ModalityMask& query) {
  if (support == query) return Task::kRegular;
  if (query.subset_of(support)) return Task::kMissing;
  if (support.disjoint_with(query)) return Task::kZeroshot;
  throw ConfigError("mask pair " + support.str() + " -> " + query.str() +
                    " fits no task (need matched, subset, or disjoint masks)");
}

void print_rows(const RunRecord& record) {
  for (const EvalRow& row : record.rows)
    std::printf("%s %s %s->%s %s %.4f +/-%.4f\n", record.setting.c_str(), record.task.c_str(),
                row.train_mask.str().c_str(), row.test_mask.str().c_str(), row.metric.c_str(),
                row.value, row.ci);
}

int cmd_gen_synth(const std::string& spec_path, const std::string& out_dir) {
  const DatasetSpec spec =
      spec_path.empty() ? DatasetSpec::desk_default() : load_dataset_spec(spec_path);
  generate_synthetic(spec, out_dir);
  const Dataset ds = Dataset::load(out_dir);
  std::printf("generated %d examples (%d base classes, %d novel classes) in %s\n", ds.size(),
              ds.num_base_classes(), ds.num_novel_classes(), out_dir.c_str());
  return 0;
}

int cmd_run(const std::string& setting_name_, const std::string& task_name_,
            const std::string& data_dir, const std::string& config_path, std::uint64_t seed,
            const std::string& out_dir) {
  const Setting setting = setting_from_name(setting_name_);
  const Task task = task_from_name(task_name_);
  const RunConfig cfg =
      config_path.empty() ? RunConfig::defaults() : RunConfig::load(config_path);
  const Dataset ds = Dataset::load(data_dir);

  PipelineResult result = run_pipeline(setting, task, ds, cfg, seed);
  fs::create_directories(out_dir);
  CheckpointMeta meta{cfg.config_hash(), cfg.to_json_text()};
  save_checkpoint((fs::path(out_dir) / "checkpoint.mmgc").string(), result.model, meta);
  write_results({result.record}, out_dir);
  print_rows(result.record);
  return 0;
}

int cmd_eval_fewshot(const std::string& checkpoint_path, const std::string& data_dir,
                     int episodes, const std::string& support_mask_text,
                     const std::string& query_mask_text, const std::string& task_text,
                     std::uint64_t seed, const std::string& out_dir) {
  const ModalityMask support = ModalityMask::parse(support_mask_text);
  const ModalityMask query = ModalityMask::parse(query_mask_text);
  const Task task = task_text.empty() ? infer_task(support, query) : task_from_name(task_text);
  validate_mask_pair(task, {support, query});

  CheckpointMeta meta;
  const Model model = load_checkpoint(checkpoint_path, &meta);
  const RunConfig cfg = RunConfig::from_json_text(meta.config_json);
  const Dataset ds = Dataset::load(data_dir);

  RunRecord record;
  record.setting = setting_name(Setting::kFewshot);
  record.task = task_name(task);
  record.config_hash = meta.config_hash;
  record.seed = seed;
  record.rows.push_back(fewshot_eval_row(model, ds, cfg, {support, query}, episodes, seed));
  print_rows(record);
  if (!out_dir.empty()) write_results({record}, out_dir);
  return 0;
}

int cmd_eval_supervised(const std::string& checkpoint_path, const std::string& data_dir,
                        const std::string& test_mask_text, const std::string& train_mask_text,
                        std::uint64_t seed, const std::string& out_dir) {
  const ModalityMask test = ModalityMask::parse(test_mask_text);
  const ModalityMask train =
      train_mask_text.empty() ? ModalityMask::all() : ModalityMask::parse(train_mask_text);

  CheckpointMeta meta;
  const Model model = load_checkpoint(checkpoint_path, &meta);
  const Dataset ds = Dataset::load(data_dir);

  RunRecord record;
  record.setting = setting_name(Setting::kSupervised);
  record.task = task_name(infer_task(train, test));
  record.config_hash = meta.config_hash;
  record.seed = seed;
  record.rows.push_back({train, test, "top1", supervised_eval(model, ds, test), 0.0});
  print_rows(record);
  if (!out_dir.empty()) write_results({record}, out_dir);
  return 0;
}

int cmd_report(const std::string& in_dir, const std::string& out_dir) {
  const std::vector<RunRecord> merged = merge_results(in_dir, out_dir);
  std::printf("merged %zu records into %s\n", merged.size(), out_dir.c_str());
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"synthetic multimodal generalization workbench"};
  app.require_subcommand(1);

  std::string spec_path, out_dir, data_dir, config_path, setting_text, task_text;
  std::string checkpoint_path, support_mask, query_mask, test_mask, train_mask, in_dir;
  std::uint64_t seed = 0;
  int episodes = 500;

  auto* gen = app.add_subcommand("gen-synth", "generate a synthetic dataset");
  gen->add_option("--spec", spec_path, "dataset spec JSON (defaults when omitted)");
  gen->add_option("--out", out_dir, "output directory")->required();

  auto* run = app.add_subcommand("run", "train a pipeline and evaluate it");
  run->add_option("--setting", setting_text, "supervised|fewshot")->required();
  run->add_option("--task", task_text, "regular|missing|zeroshot")->required();
  run->add_option("--data", data_dir, "dataset directory")->required();
  run->add_option("--config", config_path, "run config JSON (defaults when omitted)");
  run->add_option("--seed", seed, "run seed")->required();
  run->add_option("--out", out_dir, "output directory")->required();

  auto* ef = app.add_subcommand("eval-fewshot", "episodic evaluation of a checkpoint");
  ef->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  ef->add_option("--data", data_dir, "dataset directory")->required();
  ef->add_option("--episodes", episodes, "number of episodes")->required();
  ef->add_option("--support-mask", support_mask, "comma list over {video,audio,imu}")->required();
  ef->add_option("--query-mask", query_mask, "comma list over {video,audio,imu}")->required();
  ef->add_option("--task", task_text, "validate masks against a task");
  ef->add_option("--seed", seed, "evaluation seed");
  ef->add_option("--out", out_dir, "optional results directory");

  auto* es = app.add_subcommand("eval-supervised", "top-1 accuracy of a checkpoint");
  es->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  es->add_option("--data", data_dir, "dataset directory")->required();
  es->add_option("--test-mask", test_mask, "comma list over {video,audio,imu}")->required();
  es->add_option("--train-mask", train_mask, "training mask for the report row");
  es->add_option("--seed", seed, "report seed");
  es->add_option("--out", out_dir, "optional results directory");

  auto* rep = app.add_subcommand("report", "merge results.json files");
  rep->add_option("--in", in_dir, "directory searched recursively")->required();
  rep->add_option("--out", out_dir, "output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "%s\n\n%s", e.what(), app.help().c_str());
    return 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_synth(spec_path, out_dir);
    if (run->parsed())
      return cmd_run(setting_text, task_text, data_dir, config_path, seed, out_dir);
    if (ef->parsed())
      return cmd_eval_fewshot(checkpoint_path, data_dir, episodes, support_mask, query_mask,
                              task_text, seed, out_dir);
    if (es->parsed())
      return cmd_eval_supervised(checkpoint_path, data_dir, test_mask, train_mask, seed, out_dir);
    if (rep->parsed()) return cmd_report(in_dir, out_dir);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 3;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}

}  // namespace xmodal
