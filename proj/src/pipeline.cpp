// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/pipeline.hpp"

#include <algorithm>
#include <chrono>

#include "xmodal/adam.hpp"
#include "xmodal/episodic.hpp"
#include "xmodal/errors.hpp"
#include "xmodal/kernels.hpp"
#include "xmodal/losses.hpp"

namespace xmodal {

const char* stage_kind_name(StageKind k) {
  switch (k) {
    case StageKind::kUnimodalPretrain:
      return "unimodal-supervised-pretrain";
    case StageKind::kUnsupervisedPretrain:
      return "multimodal-unsupervised-pretrain";
    case StageKind::kMultimodalSupervised:
      return "multimodal-supervised-train";
    case StageKind::kMetaTrain:
      return "multimodal-meta-train";
  }
  throw ConfigError("unknown stage kind");
}

std::vector<StageKind> pipeline_stages(Setting setting, Task task) {
  if (setting == Setting::kSupervised) {
    if (task == Task::kZeroshot)
      return {StageKind::kUnsupervisedPretrain, StageKind::kMultimodalSupervised};
    return {StageKind::kUnimodalPretrain, StageKind::kMultimodalSupervised};
  }
  return {StageKind::kUnimodalPretrain, StageKind::kMultimodalSupervised,
          StageKind::kMetaTrain};
}

namespace {

std::vector<ModalityMask> all_nonempty_masks() {
  std::vector<ModalityMask> masks;
  for (int bits = 1; bits < 8; ++bits) {
    ModalityMask m;
    m.video = bits & 1;
    m.audio = bits & 2;
    m.imu = bits & 4;
    masks.push_back(m);
  }
  return masks;
}

}  // namespace

std::vector<MaskPair> legal_mask_pairs(Task task) {
  std::vector<MaskPair> pairs;
  const std::vector<ModalityMask> masks = all_nonempty_masks();
  for (const ModalityMask& s : masks) {
    for (const ModalityMask& q : masks) {
      switch (task) {
        case Task::kRegular:
          if (s == q) pairs.emplace_back(s, q);
          break;
        case Task::kMissing:
          if (q.subset_of(s) && !(q == s)) pairs.emplace_back(s, q);
          break;
        case Task::kZeroshot:
          if (s.disjoint_with(q)) pairs.emplace_back(s, q);
          break;
      }
    }
  }
  return pairs;
}

void validate_mask_pair(Task task, const MaskPair& pair) {
  const auto& [s, q] = pair;
  if (s.empty() || q.empty()) throw ConfigError("mask pair: masks must be non-empty");
  switch (task) {
    case Task::kRegular:
      if (!(s == q))
        throw ConfigError("regular task requires matching masks, got " + s.str() + " -> " +
                          q.str());
      return;
    case Task::kMissing:
      if (!q.subset_of(s) || q == s)
        throw ConfigError("missing-modality task requires the query mask to be a strict subset "
                          "of the support mask, got " +
                          s.str() + " -> " + q.str());
      return;
    case Task::kZeroshot:
      if (!s.disjoint_with(q))
        throw ConfigError("zero-shot task requires disjoint masks, got " + s.str() + " -> " +
                          q.str());
      return;
  }
}

namespace {

// Deterministic subsample (when capped) followed by per-epoch shuffles.
std::vector<int> stage_examples(const std::vector<int>& split, int cap, Rng& rng) {
  std::vector<int> idx = split;
  if (cap > 0 && cap < static_cast<int>(idx.size())) {
    for (int i = 0; i < cap; ++i) {
      const std::size_t j = i + rng.uniform_int(idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(cap);
  }
  return idx;
}

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (std::size_t i = 0; i + 1 < idx.size(); ++i) {
    const std::size_t j = i + rng.uniform_int(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
}

GradMap drop_frozen(GradMap grads, const std::vector<std::string>& freeze) {
  for (const std::string& prefix : freeze) {
    for (auto it = grads.begin(); it != grads.end();) {
      if (it->first.rfind(prefix, 0) == 0)
        it = grads.erase(it);
      else
        ++it;
    }
  }
  return grads;
}

struct LossTracker {
  int steps = 0;
  double initial = 0.0;
  double final = 0.0;
  void record(double loss) {
    if (steps == 0) initial = loss;
    final = loss;
    ++steps;
  }
};

TokensByModality load_tokens(const Dataset& ds, int idx, const ModalityMask& mask) {
  TokensByModality tokens;
  for (Modality m : mask.list()) tokens[m] = ds.tokens(idx, m);
  return tokens;
}

StageLog finish_log(StageKind kind, const LossTracker& t) {
  return {stage_kind_name(kind), t.steps, t.initial, t.final};
}

LossTracker run_unimodal_stage(Model& model, const Dataset& ds, const RunConfig& cfg, Rng& rng) {
  LossTracker tracker;
  const auto& split = ds.split_indices(Split::kBaseTrain);
  for (Modality m : kAllModalities) {
    AdamState state;
    AdamConfig adam;
    adam.lr = cfg.unimodal.lr;
    std::vector<int> idx = stage_examples(split, cfg.unimodal.max_examples, rng);
    for (int epoch = 0; epoch < cfg.unimodal.epochs; ++epoch) {
      shuffle_indices(idx, rng);
      for (std::size_t start = 0; start < idx.size(); start += cfg.unimodal.batch) {
        const std::size_t end = std::min(idx.size(), start + cfg.unimodal.batch);
        Graph g;
        ParamRef pr(model.params, /*trainable=*/true);
        std::vector<NodeId> terms;
        for (std::size_t k = start; k < end; ++k) {
          const int ex = idx[k];
          const NodeId enc =
              encoder_tokens(g, pr, model.cfg.encoder, m, g.constant(ds.tokens(ex, m)));
          const NodeId logits =
              unimodal_logits_node(g, pr, m, g.mean_rows(enc), model.num_classes);
          terms.push_back(g.cross_entropy(logits, ds.label_index(ex)));
        }
        const NodeId loss = g.scale(g.add_n(terms), 1.0 / static_cast<double>(terms.size()));
        g.forward();
        g.backward(loss);
        adam_step(model.params, drop_frozen(g.grads_by_name(), cfg.freeze), state, adam);
        tracker.record(g.value(loss).scalar_value());
      }
    }
  }
  return tracker;
}

LossTracker run_unsupervised_stage(Model& model, const Dataset& ds, const RunConfig& cfg,
                                   Rng& rng) {
  LossTracker tracker;
  AdamState state;
  AdamConfig adam;
  adam.lr = cfg.unsupervised.lr;
  std::vector<int> idx =
      stage_examples(ds.split_indices(Split::kUnlabeled), cfg.unsupervised.max_examples, rng);
  if (idx.empty()) throw DataError("unsupervised pretrain: unlabeled pool is empty");
  for (int epoch = 0; epoch < cfg.unsupervised.epochs; ++epoch) {
    shuffle_indices(idx, rng);
    for (std::size_t start = 0; start < idx.size(); start += cfg.unsupervised.batch) {
      const std::size_t end = std::min(idx.size(), start + cfg.unsupervised.batch);
      Graph g;
      ParamRef pr(model.params, /*trainable=*/true);
      std::vector<AlignTripleNodes> triples;
      for (std::size_t k = start; k < end; ++k) {
        const int ex = idx[k];
        AlignTripleNodes triple{-1, -1, -1};
        for (Modality m : kAllModalities) {
          const NodeId enc =
              encoder_tokens(g, pr, model.cfg.encoder, m, g.constant(ds.tokens(ex, m)));
          triple[static_cast<int>(m)] = fusion_feature(
              g, pr, model.cfg.fusion, {{m, enc}}, ModalityMask::single(m));
        }
        triples.push_back(triple);
      }
      const NodeId loss = alignment_loss_node(g, triples, cfg.align);
      g.forward();
      g.backward(loss);
      adam_step(model.params, drop_frozen(g.grads_by_name(), cfg.freeze), state, adam);
      tracker.record(g.value(loss).scalar_value());
    }
  }
  return tracker;
}

LossTracker run_multimodal_stage(Model& model, const Dataset& ds, const RunConfig& cfg,
                                 const StageContext& ctx, Rng& rng) {
  LossTracker tracker;
  AdamState state;
  AdamConfig adam;
  adam.lr = cfg.multimodal.lr;
  std::vector<int> idx =
      stage_examples(ds.split_indices(Split::kBaseTrain), cfg.multimodal.max_examples, rng);
  for (int epoch = 0; epoch < cfg.multimodal.epochs; ++epoch) {
    shuffle_indices(idx, rng);
    for (std::size_t start = 0; start < idx.size(); start += cfg.multimodal.batch) {
      const std::size_t end = std::min(idx.size(), start + cfg.multimodal.batch);
      Graph g;
      ParamRef pr(model.params, /*trainable=*/true);
      std::vector<NodeId> ce_terms;
      std::vector<int> batch(idx.begin() + start, idx.begin() + end);
      for (const int ex : batch) {
        const ModalityMask drop_mask = sample_modality_drop(ctx.stage_mask, cfg.drop, rng);
        const TokensByModality tokens = load_tokens(ds, ex, drop_mask);
        const NodeId feat = model_feature_node(g, pr, pr, model, tokens, drop_mask);
        const NodeId logits = fusion_logits_node(g, pr, feat);
        ce_terms.push_back(g.cross_entropy(logits, ds.label_index(ex)));
      }
      NodeId loss = g.scale(g.add_n(ce_terms), 1.0 / static_cast<double>(ce_terms.size()));
      if (ctx.with_align) {
        std::vector<AlignTripleNodes> triples;
        for (const int ex : batch) {
          AlignTripleNodes triple{-1, -1, -1};
          for (Modality m : ctx.stage_mask.list()) {
            const NodeId enc =
                encoder_tokens(g, pr, model.cfg.encoder, m, g.constant(ds.tokens(ex, m)));
            triple[static_cast<int>(m)] = fusion_feature(
                g, pr, model.cfg.fusion, {{m, enc}}, ModalityMask::single(m));
          }
          triples.push_back(triple);
        }
        const NodeId align = alignment_loss_node(g, triples, cfg.align);
        loss = g.add(loss, g.scale(align, cfg.lambda_align));
      }
      g.forward();
      g.backward(loss);
      adam_step(model.params, drop_frozen(g.grads_by_name(), cfg.freeze), state, adam);
      tracker.record(g.value(loss).scalar_value());
    }
  }
  return tracker;
}

LossTracker run_meta_stage(Model& model, const Dataset& ds, const RunConfig& cfg,
                           const StageContext& ctx, Rng& rng) {
  LossTracker tracker;
  AdamState state;
  AdamConfig adam;
  adam.lr = cfg.meta.lr;
  const std::vector<MaskPair> pairs = legal_mask_pairs(ctx.task);
  for (int e = 0; e < cfg.meta.episodes; ++e) {
    const MaskPair& pair = pairs[rng.uniform_int(pairs.size())];
    EpisodeSpec spec;
    spec.n_way = cfg.meta.n_way;
    spec.k_shot = cfg.meta.k_shot;
    spec.q_queries = cfg.meta.q_queries;
    spec.support_mask = pair.first;
    spec.query_mask = pair.second;
    spec.class_pool = Split::kBaseTrain;
    const Episode ep = sample_episode(ds, spec, rng);

    Graph g;
    ParamRef pr(model.params, /*trainable=*/true);
    std::vector<std::vector<NodeId>> support_by_class(spec.n_way);
    for (const EpisodeExample& ex : ep.support)
      support_by_class[ex.label].push_back(
          model_feature_node(g, pr, pr, model, ex.tokens, ep.support_mask));
    std::vector<std::pair<NodeId, int>> queries;
    for (const EpisodeExample& ex : ep.query)
      queries.emplace_back(model_feature_node(g, pr, pr, model, ex.tokens, ep.query_mask),
                           ex.label);
    const NodeId loss =
        proto_episode_loss_node(g, support_by_class, queries, cfg.proto_distance);
    g.forward();
    g.backward(loss);
    adam_step(model.params, drop_frozen(g.grads_by_name(), cfg.freeze), state, adam);
    tracker.record(g.value(loss).scalar_value());
  }
  return tracker;
}

}  // namespace

StageLog run_stage(StageKind kind, Model& model, const Dataset& ds, const RunConfig& cfg,
                   const StageContext& ctx, Rng& rng) {
  const auto novel_reads_before = [&] {
    long n = 0;
    for (const auto& [key, count] : ds.access_log())
      if (key.first == Split::kNovel) n += count;
    return n;
  }();

  LossTracker tracker;
  switch (kind) {
    case StageKind::kUnimodalPretrain:
      tracker = run_unimodal_stage(model, ds, cfg, rng);
      break;
    case StageKind::kUnsupervisedPretrain:
      tracker = run_unsupervised_stage(model, ds, cfg, rng);
      break;
    case StageKind::kMultimodalSupervised:
      tracker = run_multimodal_stage(model, ds, cfg, ctx, rng);
      break;
    case StageKind::kMetaTrain:
      tracker = run_meta_stage(model, ds, cfg, ctx, rng);
      break;
  }

  long novel_reads_after = 0;
  for (const auto& [key, count] : ds.access_log())
    if (key.first == Split::kNovel) novel_reads_after += count;
  if (novel_reads_after != novel_reads_before)
    throw Error(std::string("stage '") + stage_kind_name(kind) +
                "' read novel-class data during training");

  return finish_log(kind, tracker);
}

double supervised_eval(const Model& model, const Dataset& ds, const ModalityMask& test_mask) {
  const auto& split = ds.split_indices(Split::kBaseTest);
  if (split.empty()) throw DataError("supervised_eval: base-test split is empty");
  if (test_mask.empty()) throw DataError("supervised_eval: empty test mask");
  int correct = 0;
  for (int idx : split) {
    const Tensor logits = model_logits(model, load_tokens(ds, idx, test_mask), test_mask);
    if (argmax_index(logits) == ds.label_index(idx)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

EvalRow fewshot_eval_row(const Model& model, const Dataset& ds, const RunConfig& cfg,
                         const MaskPair& pair, int episodes, std::uint64_t seed) {
  EpisodeSpec spec;
  spec.n_way = cfg.fewshot_eval.n_way;
  spec.k_shot = cfg.fewshot_eval.k_shot;
  spec.q_queries = cfg.fewshot_eval.q_queries;
  spec.support_mask = pair.first;
  spec.query_mask = pair.second;
  spec.class_pool = Split::kNovel;
  const SuiteResult r = run_fewshot_suite(model, ds, spec, cfg.fewshot_eval.finetune, episodes,
                                          seed, cfg.eval_workers);
  return {pair.first, pair.second, "fewshot-top1", r.mean_accuracy, r.ci95};
}

PipelineResult run_pipeline(Setting setting, Task task, const Dataset& ds, const RunConfig& cfg,
                            std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();

  // Encoder token shapes come from the data, not the config file.
  RunConfig resolved = cfg;
  for (Modality m : kAllModalities) {
    const TokenShape shape = ds.token_shape(m);
    resolved.model.encoder.shape(m) = {shape.width, shape.count};
  }

  Model model = build_model(resolved.model, ds.num_base_classes(), mix_seed(seed, "init"));

  RunRecord record;
  record.setting = setting_name(setting);
  record.task = task_name(task);
  record.config_hash = cfg.config_hash();
  record.seed = seed;

  const std::vector<StageKind> stages = pipeline_stages(setting, task);
  for (std::size_t i = 0; i < stages.size(); ++i) {
    record.stages.push_back(stage_kind_name(stages[i]));
    StageContext ctx;
    ctx.setting = setting;
    ctx.task = task;
    if (stages[i] == StageKind::kMultimodalSupervised) {
      // Table-2 cell: zero-shot supervised trains CE only, on the training
      // modalities; every other multimodal CE stage adds the alignment term.
      const bool zeroshot_supervised = (setting == Setting::kSupervised && task == Task::kZeroshot);
      ctx.with_align = !zeroshot_supervised;
      ctx.stage_mask = zeroshot_supervised ? cfg.zeroshot_train_mask : ModalityMask::all();
    }
    Rng stage_rng(mix_seed(mix_seed(seed, "stage"), static_cast<std::uint64_t>(i)));
    record.stage_logs.push_back(run_stage(stages[i], model, ds, resolved, ctx, stage_rng));
  }

  // Evaluation rows.
  const ModalityMask full = ModalityMask::all();
  if (setting == Setting::kSupervised) {
    std::vector<MaskPair> rows;
    if (task == Task::kRegular) rows.emplace_back(full, full);
    if (task == Task::kMissing)
      for (const ModalityMask& t : cfg.missing_test_masks) rows.emplace_back(full, t);
    if (task == Task::kZeroshot)
      for (const ModalityMask& t : cfg.zeroshot_test_masks)
        rows.emplace_back(cfg.zeroshot_train_mask, t);
    for (const auto& [train, test] : rows) {
      validate_mask_pair(task, {train, test});
      record.rows.push_back({train, test, "top1", supervised_eval(model, ds, test), 0.0});
    }
  } else {
    std::vector<MaskPair> rows;
    if (task == Task::kRegular) rows.emplace_back(full, full);
    if (task == Task::kMissing)
      for (const ModalityMask& q : cfg.missing_test_masks) rows.emplace_back(full, q);
    if (task == Task::kZeroshot) rows = cfg.fewshot_zeroshot_pairs;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      validate_mask_pair(task, rows[i]);
      record.rows.push_back(fewshot_eval_row(model, ds, resolved, rows[i],
                                             cfg.fewshot_eval.episodes,
                                             mix_seed(mix_seed(seed, "eval"), i)));
    }
  }

  record.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(record), std::move(model)};
}

}  // namespace xmodal
