// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/config.hpp"

#include <fstream>

#include <json.hpp>

#include "xmodal/errors.hpp"
#include "xmodal/rng.hpp"

using nlohmann::ordered_json;

namespace xmodal {

const char* setting_name(Setting s) {
  return s == Setting::kSupervised ? "supervised" : "fewshot";
}

const char* task_name(Task t) {
  switch (t) {
    case Task::kRegular:
      return "regular";
    case Task::kMissing:
      return "missing";
    case Task::kZeroshot:
      return "zeroshot";
  }
  throw ConfigError("unknown task enum");
}

Setting setting_from_name(const std::string& name) {
  if (name == "supervised") return Setting::kSupervised;
  if (name == "fewshot") return Setting::kFewshot;
  throw ConfigError("unknown setting '" + name + "' (expected supervised|fewshot)");
}

Task task_from_name(const std::string& name) {
  if (name == "regular") return Task::kRegular;
  if (name == "missing") return Task::kMissing;
  if (name == "zeroshot") return Task::kZeroshot;
  throw ConfigError("unknown task '" + name + "' (expected regular|missing|zeroshot)");
}

std::string proto_distance_name(ProtoDistance d) {
  return d == ProtoDistance::kSquaredL2 ? "sq_l2" : "l2";
}

ProtoDistance proto_distance_from_name(const std::string& name) {
  if (name == "sq_l2") return ProtoDistance::kSquaredL2;
  if (name == "l2") return ProtoDistance::kL2;
  throw ConfigError("unknown proto distance '" + name + "'");
}

RunConfig RunConfig::defaults() {
  RunConfig cfg;
  cfg.model = ModelConfig::desk_default();
  cfg.missing_test_masks = {
      ModalityMask{true, true, false}, ModalityMask{false, true, true},
      ModalityMask{true, false, true}, ModalityMask{true, false, false},
      ModalityMask{false, true, false}, ModalityMask{false, false, true}};
  const ModalityMask v{true, false, false}, a{false, true, false}, i{false, false, true},
      ai{false, true, true};
  cfg.fewshot_zeroshot_pairs = {{a, v}, {i, v}, {ai, v}, {v, a}, {v, i}, {v, ai}};
  return cfg;
}

namespace {

Pooling pooling_from_name(const std::string& name) {
  if (name == "mean") return Pooling::kMean;
  if (name == "cls") return Pooling::kCls;
  throw ConfigError("unknown pooling '" + name + "'");
}

FusionKind fusion_kind_from_name(const std::string& name) {
  if (name == "attention") return FusionKind::kAttention;
  if (name == "mlp") return FusionKind::kMlp;
  throw ConfigError("unknown fusion kind '" + name + "'");
}

StageHyper stage_from_json(const ordered_json& j, StageHyper d) {
  d.epochs = j.value("epochs", d.epochs);
  d.batch = j.value("batch", d.batch);
  d.lr = j.value("lr", d.lr);
  d.max_examples = j.value("max_examples", d.max_examples);
  return d;
}

ordered_json stage_to_json(const StageHyper& h) {
  return {{"epochs", h.epochs}, {"batch", h.batch}, {"lr", h.lr}, {"max_examples", h.max_examples}};
}

std::vector<ModalityMask> masks_from_json(const ordered_json& j) {
  std::vector<ModalityMask> out;
  for (const auto& m : j) out.push_back(ModalityMask::parse(m.get<std::string>()));
  return out;
}

ordered_json masks_to_json(const std::vector<ModalityMask>& masks) {
  ordered_json j = ordered_json::array();
  for (const ModalityMask& m : masks) j.push_back(m.str());
  return j;
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  RunConfig cfg = defaults();
  try {
    if (j.contains("model")) {
      const auto& m = j["model"];
      cfg.model.encoder.dim = m.value("dim", cfg.model.encoder.dim);
      cfg.model.fusion.dim = cfg.model.encoder.dim;
      cfg.model.encoder.depth = m.value("encoder_depth", cfg.model.encoder.depth);
      cfg.model.encoder.heads = m.value("encoder_heads", cfg.model.encoder.heads);
      cfg.model.fusion.depth = m.value("fusion_depth", cfg.model.fusion.depth);
      cfg.model.fusion.heads = m.value("fusion_heads", cfg.model.fusion.heads);
      if (m.contains("pooling")) cfg.model.fusion.pooling = pooling_from_name(m["pooling"]);
      if (m.contains("fusion_kind"))
        cfg.model.fusion.kind = fusion_kind_from_name(m["fusion_kind"]);
    }
    if (j.contains("losses")) {
      const auto& l = j["losses"];
      cfg.lambda_align = l.value("lambda_align", cfg.lambda_align);
      cfg.align.tau = l.value("tau", cfg.align.tau);
      cfg.align.symmetric = l.value("symmetric_align", cfg.align.symmetric);
      if (l.contains("proto_distance"))
        cfg.proto_distance = proto_distance_from_name(l["proto_distance"]);
    }
    if (j.contains("drop")) cfg.drop.p = j["drop"].value("p", cfg.drop.p);
    if (j.contains("stages")) {
      const auto& s = j["stages"];
      if (s.contains("unimodal")) cfg.unimodal = stage_from_json(s["unimodal"], cfg.unimodal);
      if (s.contains("unsupervised"))
        cfg.unsupervised = stage_from_json(s["unsupervised"], cfg.unsupervised);
      if (s.contains("multimodal"))
        cfg.multimodal = stage_from_json(s["multimodal"], cfg.multimodal);
      if (s.contains("meta")) {
        const auto& m = s["meta"];
        cfg.meta.episodes = m.value("episodes", cfg.meta.episodes);
        cfg.meta.n_way = m.value("n_way", cfg.meta.n_way);
        cfg.meta.k_shot = m.value("k_shot", cfg.meta.k_shot);
        cfg.meta.q_queries = m.value("q_queries", cfg.meta.q_queries);
        cfg.meta.lr = m.value("lr", cfg.meta.lr);
      }
    }
    if (j.contains("zeroshot")) {
      const auto& z = j["zeroshot"];
      if (z.contains("train_modalities"))
        cfg.zeroshot_train_mask = ModalityMask::parse(z["train_modalities"]);
      if (z.contains("test_masks")) cfg.zeroshot_test_masks = masks_from_json(z["test_masks"]);
    }
    if (j.contains("eval")) {
      const auto& e = j["eval"];
      cfg.eval_workers = e.value("workers", cfg.eval_workers);
      if (e.contains("supervised") && e["supervised"].contains("missing_test_masks"))
        cfg.missing_test_masks = masks_from_json(e["supervised"]["missing_test_masks"]);
      if (e.contains("fewshot")) {
        const auto& f = e["fewshot"];
        cfg.fewshot_eval.n_way = f.value("n_way", cfg.fewshot_eval.n_way);
        cfg.fewshot_eval.k_shot = f.value("k_shot", cfg.fewshot_eval.k_shot);
        cfg.fewshot_eval.q_queries = f.value("q_queries", cfg.fewshot_eval.q_queries);
        cfg.fewshot_eval.episodes = f.value("episodes", cfg.fewshot_eval.episodes);
        if (f.contains("finetune")) {
          const auto& ft = f["finetune"];
          cfg.fewshot_eval.finetune.steps = ft.value("steps", cfg.fewshot_eval.finetune.steps);
          cfg.fewshot_eval.finetune.lr = ft.value("lr", cfg.fewshot_eval.finetune.lr);
          if (ft.contains("scope"))
            cfg.fewshot_eval.finetune.scope = finetune_scope_from_name(ft["scope"]);
        }
        if (f.contains("zeroshot_pairs")) {
          cfg.fewshot_zeroshot_pairs.clear();
          for (const auto& p : f["zeroshot_pairs"])
            cfg.fewshot_zeroshot_pairs.emplace_back(ModalityMask::parse(p.at(0)),
                                                    ModalityMask::parse(p.at(1)));
        }
        if (f.contains("missing_query_masks"))
          cfg.missing_test_masks = masks_from_json(f["missing_query_masks"]);
      }
    }
    if (j.contains("freeze")) cfg.freeze = j["freeze"].get<std::vector<std::string>>();
  } catch (const ordered_json::exception& e) {
    throw ConfigError(std::string("config: malformed value: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return from_json_text(text);
}

std::string RunConfig::to_json_text() const {
  ordered_json j;
  j["model"] = {{"dim", model.encoder.dim},
                {"encoder_depth", model.encoder.depth},
                {"encoder_heads", model.encoder.heads},
                {"fusion_depth", model.fusion.depth},
                {"fusion_heads", model.fusion.heads},
                {"pooling", model.fusion.pooling == Pooling::kMean ? "mean" : "cls"},
                {"fusion_kind",
                 model.fusion.kind == FusionKind::kAttention ? "attention" : "mlp"}};
  j["losses"] = {{"lambda_align", lambda_align},
                 {"tau", align.tau},
                 {"symmetric_align", align.symmetric},
                 {"proto_distance", proto_distance_name(proto_distance)}};
  j["drop"] = {{"p", drop.p}};
  j["stages"] = {{"unimodal", stage_to_json(unimodal)},
                 {"unsupervised", stage_to_json(unsupervised)},
                 {"multimodal", stage_to_json(multimodal)},
                 {"meta",
                  {{"episodes", meta.episodes},
                   {"n_way", meta.n_way},
                   {"k_shot", meta.k_shot},
                   {"q_queries", meta.q_queries},
                   {"lr", meta.lr}}}};
  j["zeroshot"] = {{"train_modalities", zeroshot_train_mask.str()},
                   {"test_masks", masks_to_json(zeroshot_test_masks)}};
  ordered_json pairs = ordered_json::array();
  for (const auto& [s, q] : fewshot_zeroshot_pairs) pairs.push_back({s.str(), q.str()});
  j["eval"] = {
      {"workers", eval_workers},
      {"supervised", {{"missing_test_masks", masks_to_json(missing_test_masks)}}},
      {"fewshot",
       {{"n_way", fewshot_eval.n_way},
        {"k_shot", fewshot_eval.k_shot},
        {"q_queries", fewshot_eval.q_queries},
        {"episodes", fewshot_eval.episodes},
        {"finetune",
         {{"steps", fewshot_eval.finetune.steps},
          {"lr", fewshot_eval.finetune.lr},
          {"scope",
           fewshot_eval.finetune.scope == FinetuneConfig::Scope::kHeadOnly ? "head"
                                                                           : "head+fusion"}}},
        {"zeroshot_pairs", pairs}}}};
  j["freeze"] = freeze;
  return j.dump(2);
}

std::uint64_t RunConfig::config_hash() const { return fnv1a64(to_json_text()); }

void RunConfig::validate() const {
  model.validate();
  align.validate();
  drop.validate();
  fewshot_eval.finetune.validate();
  if (lambda_align < 0) throw ConfigError("config: lambda_align must be >= 0");
  if (unimodal.epochs < 0 || unsupervised.epochs < 0 || multimodal.epochs < 0)
    throw ConfigError("config: negative epoch count");
  if (unimodal.batch < 1 || unsupervised.batch < 1 || multimodal.batch < 1)
    throw ConfigError("config: batch size must be >= 1");
  if (meta.episodes < 0) throw ConfigError("config: negative meta episodes");
  if (eval_workers < 1) throw ConfigError("config: eval workers must be >= 1");
  if (zeroshot_train_mask.empty()) throw ConfigError("config: empty zero-shot train mask");
  for (const ModalityMask& test : zeroshot_test_masks)
    if (!test.disjoint_with(zeroshot_train_mask))
      throw ConfigError("config: zero-shot test mask '" + test.str() +
                        "' overlaps train mask '" + zeroshot_train_mask.str() + "'");
  const ModalityMask full = ModalityMask::all();
  for (const ModalityMask& test : missing_test_masks)
    if (test == full || !test.subset_of(full) || test.empty())
      throw ConfigError("config: missing-modality test mask must be a strict non-empty subset");
  for (const auto& [s, q] : fewshot_zeroshot_pairs)
    if (!s.disjoint_with(q) || s.empty() || q.empty())
      throw ConfigError("config: few-shot zero-shot pair must be disjoint and non-empty");
}

}  // namespace xmodal
