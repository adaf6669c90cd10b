// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/episodic.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "xmodal/adam.hpp"
#include "xmodal/errors.hpp"
#include "xmodal/kernels.hpp"
#include "xmodal/losses.hpp"

namespace xmodal {

void EpisodeSpec::validate() const {
  if (n_way < 2) throw ConfigError("episode: n_way must be >= 2");
  if (k_shot < 1 || q_queries < 1) throw ConfigError("episode: k_shot and q_queries must be >= 1");
  if (support_mask.empty() || query_mask.empty())
    throw ConfigError("episode: masks must be non-empty");
  if (class_pool == Split::kUnlabeled) throw ConfigError("episode: class pool must be labeled");
}

void FinetuneConfig::validate() const {
  if (steps < 1) throw ConfigError("finetune: steps must be >= 1");
  if (lr <= 0) throw ConfigError("finetune: lr must be positive");
}

FinetuneConfig::Scope finetune_scope_from_name(const std::string& name) {
  if (name == "head") return FinetuneConfig::Scope::kHeadOnly;
  if (name == "head+fusion") return FinetuneConfig::Scope::kHeadAndFusion;
  throw ConfigError("finetune: unknown scope '" + name + "'");
}

namespace {

// Partial Fisher-Yates: the first `take` entries of a shuffled copy.
std::vector<int> draw_without_replacement(const std::vector<int>& pool, int take, Rng& rng) {
  std::vector<int> items = pool;
  for (int i = 0; i < take; ++i) {
    const std::size_t j = i + rng.uniform_int(items.size() - i);
    std::swap(items[i], items[j]);
  }
  items.resize(take);
  return items;
}

EpisodeExample make_example(const Dataset& ds, int idx, int relabel, const ModalityMask& mask) {
  EpisodeExample e;
  e.dataset_index = idx;
  e.id = ds.example(idx).id;
  e.label = relabel;
  for (Modality m : mask.list()) e.tokens[m] = ds.tokens(idx, m);
  return e;
}

}  // namespace

Episode sample_episode(const Dataset& ds, const EpisodeSpec& spec, Rng& rng) {
  spec.validate();
  const auto& by_class = ds.by_class(spec.class_pool);
  const int need = spec.k_shot + spec.q_queries;

  std::vector<int> eligible;
  for (int c = 0; c < static_cast<int>(by_class.size()); ++c)
    if (static_cast<int>(by_class[c].size()) >= need) eligible.push_back(c);
  if (static_cast<int>(eligible.size()) < spec.n_way)
    throw DataError("episode: pool '" + std::string(split_name(spec.class_pool)) + "' has " +
                    std::to_string(eligible.size()) + " classes with >= " + std::to_string(need) +
                    " examples, need " + std::to_string(spec.n_way));

  Episode ep;
  ep.support_mask = spec.support_mask;
  ep.query_mask = spec.query_mask;
  ep.class_table = draw_without_replacement(eligible, spec.n_way, rng);
  for (int relabel = 0; relabel < spec.n_way; ++relabel) {
    const int orig = ep.class_table[relabel];
    const std::vector<int> picks = draw_without_replacement(by_class[orig], need, rng);
    for (int i = 0; i < spec.k_shot; ++i)
      ep.support.push_back(make_example(ds, picks[i], relabel, spec.support_mask));
    for (int i = spec.k_shot; i < need; ++i)
      ep.query.push_back(make_example(ds, picks[i], relabel, spec.query_mask));
  }
  return ep;
}

namespace {

// Trains a fresh zero-initialized N-way linear head on precomputed support
// features with full-batch Adam, then classifies the query features.
EpisodeEvalResult head_finetune(const std::vector<Tensor>& support_z,
                                const std::vector<int>& support_y,
                                const std::vector<Tensor>& query_z,
                                const std::vector<int>& query_y, int n_way,
                                const FinetuneConfig& cfg) {
  const int dim = support_z.at(0).dims()[0];
  ParamStore head;
  head["w"] = Tensor::zeros({dim, n_way});
  head["b"] = Tensor::zeros({n_way});
  AdamState state;
  AdamConfig adam;
  adam.lr = cfg.lr;

  int steps_run = 0;
  for (int step = 0; step < cfg.steps; ++step) {
    Graph g;
    const NodeId w = g.param("w", head["w"]);
    const NodeId b = g.param("b", head["b"]);
    std::vector<NodeId> terms;
    terms.reserve(support_z.size());
    for (std::size_t i = 0; i < support_z.size(); ++i) {
      const NodeId logits = g.add(g.matmul(g.constant(support_z[i]), w), b);
      terms.push_back(g.cross_entropy(logits, support_y[i]));
    }
    const NodeId loss = g.scale(g.add_n(terms), 1.0 / static_cast<double>(terms.size()));
    g.forward();
    g.backward(loss);
    adam_step(head, g.grads_by_name(), state, adam);
    ++steps_run;
  }

  int correct = 0;
  for (std::size_t i = 0; i < query_z.size(); ++i) {
    const Tensor logits = k_add(k_matmul(query_z[i], head["w"]), head["b"]);
    if (argmax_index(logits) == query_y[i]) ++correct;
  }
  return {static_cast<double>(correct) / static_cast<double>(query_z.size()), steps_run};
}

}  // namespace

EpisodeEvalResult fewshot_finetune_eval(const EmbedFn& embed, const Episode& episode,
                                        const FinetuneConfig& cfg) {
  cfg.validate();
  if (episode.support.empty() || episode.query.empty())
    throw DataError("fewshot eval: empty episode");
  const int n_way = static_cast<int>(episode.class_table.size());

  std::vector<Tensor> support_z, query_z;
  std::vector<int> support_y, query_y;
  for (const EpisodeExample& e : episode.support) {
    support_z.push_back(embed(e.tokens, episode.support_mask));
    support_y.push_back(e.label);
  }
  for (const EpisodeExample& e : episode.query) {
    query_z.push_back(embed(e.tokens, episode.query_mask));
    query_y.push_back(e.label);
  }
  return head_finetune(support_z, support_y, query_z, query_y, n_way, cfg);
}

EpisodeEvalResult fewshot_finetune_eval(const Model& model, const Episode& episode,
                                        const FinetuneConfig& cfg) {
  cfg.validate();
  if (cfg.scope == FinetuneConfig::Scope::kHeadOnly) {
    EmbedFn embed = [&model](const TokensByModality& tokens, const ModalityMask& mask) {
      return model_embed(model, tokens, mask);
    };
    return fewshot_finetune_eval(embed, episode, cfg);
  }

  // head+fusion: encoders stay frozen, a private copy of the fusion parameters
  // trains together with the head. Encoder outputs are fixed, so compute them
  // once per example.
  const int n_way = static_cast<int>(episode.class_table.size());
  const int dim = model.cfg.fusion.dim;

  ParamStore local;  // fusion params + fresh head
  for (const auto& [name, tensor] : model.params)
    if (name.rfind("fusion.", 0) == 0 || name.rfind("mlpfuse.", 0) == 0) local[name] = tensor;
  local["epi.head.w"] = Tensor::zeros({dim, n_way});
  local["epi.head.b"] = Tensor::zeros({n_way});

  auto encode_all = [&](const std::vector<EpisodeExample>& examples, const ModalityMask& mask) {
    std::vector<std::vector<std::pair<Modality, Tensor>>> out;
    for (const EpisodeExample& e : examples) {
      std::vector<std::pair<Modality, Tensor>> enc;
      for (Modality m : mask.list()) {
        auto it = e.tokens.find(m);
        if (it == e.tokens.end()) throw DataError("fewshot eval: episode/model mask mismatch");
        ModalitySample sample{m, it->second, e.id};
        enc.emplace_back(m, encode(sample, model.params, model.cfg.encoder).tokens_out);
      }
      out.push_back(std::move(enc));
    }
    return out;
  };
  const auto support_enc = encode_all(episode.support, episode.support_mask);
  const auto query_enc = encode_all(episode.query, episode.query_mask);

  AdamState state;
  AdamConfig adam;
  adam.lr = cfg.lr;
  int steps_run = 0;
  for (int step = 0; step < cfg.steps; ++step) {
    Graph g;
    ParamRef fus_ref(local, /*trainable=*/true);
    std::vector<NodeId> terms;
    for (std::size_t i = 0; i < support_enc.size(); ++i) {
      std::vector<std::pair<Modality, NodeId>> tokens;
      for (const auto& [m, t] : support_enc[i]) tokens.emplace_back(m, g.constant(t));
      NodeId feat;
      if (model.cfg.fusion.kind == FusionKind::kMlp) {
        std::vector<std::pair<Modality, NodeId>> pooled;
        for (const auto& [m, node] : tokens) pooled.emplace_back(m, g.mean_rows(node));
        feat = mlp_fusion_feature(g, fus_ref, model.cfg.fusion, pooled, episode.support_mask);
      } else {
        feat = fusion_feature(g, fus_ref, model.cfg.fusion, tokens, episode.support_mask);
      }
      const NodeId logits =
          g.add(g.matmul(feat, fus_ref.node(g, "epi.head.w")), fus_ref.node(g, "epi.head.b"));
      terms.push_back(g.cross_entropy(logits, episode.support[i].label));
    }
    const NodeId loss = g.scale(g.add_n(terms), 1.0 / static_cast<double>(terms.size()));
    g.forward();
    g.backward(loss);
    adam_step(local, g.grads_by_name(), state, adam);
    ++steps_run;
  }

  int correct = 0;
  for (std::size_t i = 0; i < query_enc.size(); ++i) {
    std::vector<EncodedModality> encoded;
    for (const auto& [m, t] : query_enc[i]) {
      EncodedModality e;
      e.modality = m;
      e.tokens_out = t;
      e.pooled = k_mean_rows(t);
      encoded.push_back(std::move(e));
    }
    const UnifiedFeature f = fuse(encoded, episode.query_mask, local, model.cfg.fusion);
    const Tensor logits = k_add(k_matmul(f.z, local["epi.head.w"]), local["epi.head.b"]);
    if (argmax_index(logits) == episode.query[i].label) ++correct;
  }
  return {static_cast<double>(correct) / static_cast<double>(query_enc.size()), steps_run};
}

namespace {

SuiteResult summarize(const std::vector<double>& accs) {
  SuiteResult r;
  r.episodes = static_cast<int>(accs.size());
  double sum = 0.0;
  for (double a : accs) sum += a;
  r.mean_accuracy = sum / r.episodes;
  if (r.episodes == 1) {
    r.ci95 = 0.0;
    r.degenerate_ci = true;
    return r;
  }
  double ss = 0.0;
  for (double a : accs) ss += (a - r.mean_accuracy) * (a - r.mean_accuracy);
  const double sd = std::sqrt(ss / (r.episodes - 1));
  r.ci95 = 1.96 * sd / std::sqrt(static_cast<double>(r.episodes));
  return r;
}

SuiteResult run_suite_impl(const std::function<double(std::uint64_t)>& episode_accuracy,
                           int num_episodes, std::uint64_t base_seed, int workers) {
  if (num_episodes < 1) throw ConfigError("suite: num_episodes must be >= 1");
  std::vector<double> accs(num_episodes, 0.0);
  if (workers <= 1) {
    for (int i = 0; i < num_episodes; ++i) accs[i] = episode_accuracy(mix_seed(base_seed, static_cast<std::uint64_t>(i)));
  } else {
    std::atomic<int> next{0};
    auto worker = [&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= num_episodes) return;
        accs[i] = episode_accuracy(mix_seed(base_seed, static_cast<std::uint64_t>(i)));
      }
    };
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }
  return summarize(accs);
}

}  // namespace

SuiteResult run_fewshot_suite(const EmbedFn& embed, const Dataset& ds, const EpisodeSpec& spec,
                              const FinetuneConfig& ft, int num_episodes,
                              std::uint64_t base_seed, int workers) {
  ds.prefetch(spec.class_pool);  // warm the cache so workers read without contention
  auto one = [&](std::uint64_t seed) {
    Rng rng(seed);
    const Episode ep = sample_episode(ds, spec, rng);
    return fewshot_finetune_eval(embed, ep, ft).accuracy;
  };
  return run_suite_impl(one, num_episodes, base_seed, workers);
}

SuiteResult run_fewshot_suite(const Model& model, const Dataset& ds, const EpisodeSpec& spec,
                              const FinetuneConfig& ft, int num_episodes,
                              std::uint64_t base_seed, int workers) {
  ds.prefetch(spec.class_pool);
  auto one = [&](std::uint64_t seed) {
    Rng rng(seed);
    const Episode ep = sample_episode(ds, spec, rng);
    return fewshot_finetune_eval(model, ep, ft).accuracy;
  };
  return run_suite_impl(one, num_episodes, base_seed, workers);
}

}  // namespace xmodal
