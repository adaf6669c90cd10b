// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "xmodal/errors.hpp"
#include "xmodal/rng.hpp"
#include "xmodal/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace xmodal {

DatasetSpec DatasetSpec::desk_default() {
  DatasetSpec s;
  s.token_shapes[static_cast<int>(Modality::kVideo)] = {8, 16};
  s.token_shapes[static_cast<int>(Modality::kAudio)] = {6, 12};
  s.token_shapes[static_cast<int>(Modality::kImu)] = {4, 8};
  s.noise_scales = {0.1, 0.5, 1.0};
  return s;
}

void DatasetSpec::validate() const {
  if (num_base_classes < 2 || num_novel_classes < 2)
    throw DataError("dataset spec: base and novel class counts must be >= 2");
  if (examples_per_base_class < 1 || examples_per_novel_class < 1)
    throw DataError("dataset spec: examples per class must be >= 1");
  if (latent_dim < 1) throw DataError("dataset spec: latent_dim must be >= 1");
  for (Modality m : kAllModalities) {
    if (shape(m).count < 1 || shape(m).width < 1)
      throw DataError(std::string("dataset spec: bad token shape for ") + modality_name(m));
    if (noise(m) < 0) throw DataError("dataset spec: noise scales must be >= 0");
  }
  if (mu_scale < 0) throw DataError("dataset spec: mu_scale must be >= 0");
  if (class_spread < 0 || clip_noise < 0) throw DataError("dataset spec: spreads must be >= 0");
  if (unlabeled_pool_size < 0) throw DataError("dataset spec: negative pool size");
  if (clip_group < 1) throw DataError("dataset spec: clip_group must be >= 1");
  if (base_test_fraction <= 0 || base_test_fraction >= 1)
    throw DataError("dataset spec: base_test_fraction must lie in (0, 1)");
}

DatasetSpec dataset_spec_from_json_text(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw DataError(std::string("dataset spec: parse error: ") + e.what());
  }
  DatasetSpec s = DatasetSpec::desk_default();
  try {
    s.num_base_classes = j.value("num_base_classes", s.num_base_classes);
    s.num_novel_classes = j.value("num_novel_classes", s.num_novel_classes);
    s.examples_per_base_class = j.value("examples_per_base_class", s.examples_per_base_class);
    s.examples_per_novel_class = j.value("examples_per_novel_class", s.examples_per_novel_class);
    s.latent_dim = j.value("latent_dim", s.latent_dim);
    if (j.contains("tokens"))
      for (Modality m : kAllModalities)
        if (j["tokens"].contains(modality_name(m))) {
          const auto& t = j["tokens"][modality_name(m)];
          s.token_shapes[static_cast<int>(m)] = {t.at(0).get<int>(), t.at(1).get<int>()};
        }
    if (j.contains("noise"))
      for (Modality m : kAllModalities)
        if (j["noise"].contains(modality_name(m)))
          s.noise_scales[static_cast<int>(m)] = j["noise"][modality_name(m)].get<double>();
    s.mu_scale = j.value("mu_scale", s.mu_scale);
    s.class_spread = j.value("class_spread", s.class_spread);
    s.clip_noise = j.value("clip_noise", s.clip_noise);
    s.unlabeled_pool_size = j.value("unlabeled_pool_size", s.unlabeled_pool_size);
    s.clip_group = j.value("clip_group", s.clip_group);
    s.base_test_fraction = j.value("base_test_fraction", s.base_test_fraction);
    s.seed = j.value("seed", s.seed);
  } catch (const ordered_json::exception& e) {
    throw DataError(std::string("dataset spec: malformed value: ") + e.what());
  }
  s.validate();
  return s;
}

DatasetSpec load_dataset_spec(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("dataset spec: cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return dataset_spec_from_json_text(text);
}

std::string dataset_spec_to_json_text(const DatasetSpec& s) {
  ordered_json j;
  j["num_base_classes"] = s.num_base_classes;
  j["num_novel_classes"] = s.num_novel_classes;
  j["examples_per_base_class"] = s.examples_per_base_class;
  j["examples_per_novel_class"] = s.examples_per_novel_class;
  j["latent_dim"] = s.latent_dim;
  for (Modality m : kAllModalities)
    j["tokens"][modality_name(m)] = {s.shape(m).count, s.shape(m).width};
  for (Modality m : kAllModalities) j["noise"][modality_name(m)] = s.noise(m);
  j["mu_scale"] = s.mu_scale;
  j["class_spread"] = s.class_spread;
  j["clip_noise"] = s.clip_noise;
  j["unlabeled_pool_size"] = s.unlabeled_pool_size;
  j["clip_group"] = s.clip_group;
  j["base_test_fraction"] = s.base_test_fraction;
  j["seed"] = s.seed;
  return j.dump(2);
}

const char* split_name(Split s) {
  switch (s) {
    case Split::kBaseTrain:
      return "base-train";
    case Split::kBaseTest:
      return "base-test";
    case Split::kNovel:
      return "novel";
    case Split::kUnlabeled:
      return "unlabeled";
  }
  throw DataError("unknown split enum");
}

Split split_from_name(const std::string& name) {
  if (name == "base-train") return Split::kBaseTrain;
  if (name == "base-test") return Split::kBaseTest;
  if (name == "novel") return Split::kNovel;
  if (name == "unlabeled") return Split::kUnlabeled;
  throw DataError("unknown split '" + name + "'");
}

Tensor generator_modality_map(const DatasetSpec& spec, Modality m) {
  const TokenShape& sh = spec.shape(m);
  Rng rng(mix_seed(spec.seed, std::string("map.") + modality_name(m)));
  Tensor map = Tensor::zeros({sh.count * sh.width, spec.latent_dim});
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.latent_dim));
  for (std::size_t i = 0; i < map.size(); ++i) map[i] = rng.normal() * scale;
  return map;
}

Tensor generator_class_mean(const DatasetSpec& spec, int class_index) {
  if (class_index < 0 || class_index >= spec.num_base_classes + spec.num_novel_classes)
    throw DataError("generator_class_mean: class index out of range");
  Rng rng(mix_seed(spec.seed, "mu." + std::to_string(class_index)));
  Tensor mu = Tensor::zeros({spec.latent_dim});
  for (std::size_t i = 0; i < mu.size(); ++i) mu[i] = rng.normal() * spec.mu_scale;
  return mu;
}

namespace {

std::string class_name(const DatasetSpec& spec, int class_index) {
  char buf[32];
  if (class_index < spec.num_base_classes)
    std::snprintf(buf, sizeof buf, "base_%02d", class_index);
  else
    std::snprintf(buf, sizeof buf, "novel_%02d", class_index - spec.num_base_classes);
  return buf;
}

}  // namespace

void generate_synthetic(const DatasetSpec& spec, const std::string& out_dir) {
  spec.validate();
  const fs::path out(out_dir);
  fs::create_directories(out);

  Manifest manifest;
  for (int k = 0; k < spec.num_base_classes; ++k)
    manifest.base_classes.push_back(class_name(spec, k));
  for (int k = 0; k < spec.num_novel_classes; ++k)
    manifest.novel_classes.push_back(class_name(spec, spec.num_base_classes + k));

  std::array<Tensor, 3> maps;
  for (Modality m : kAllModalities) maps[static_cast<int>(m)] = generator_modality_map(spec, m);

  int example_counter = 0;
  int clip_counter = -1;
  Tensor clip_nu = Tensor::zeros({spec.latent_dim});

  auto next_clip = [&]() {
    ++clip_counter;
    Rng clip_rng(mix_seed(spec.seed, "clip." + std::to_string(clip_counter)));
    for (std::size_t i = 0; i < clip_nu.size(); ++i)
      clip_nu[i] = spec.clip_noise * clip_rng.normal();
  };

  auto emit = [&](int class_index, Split split, bool labeled) {
    char idbuf[16];
    std::snprintf(idbuf, sizeof idbuf, "e%06d", example_counter);
    char clipbuf[16];
    std::snprintf(clipbuf, sizeof clipbuf, "c%06d", clip_counter);
    Rng ex_rng(mix_seed(spec.seed, "ex." + std::to_string(example_counter)));
    ++example_counter;

    Tensor u = generator_class_mean(spec, class_index);
    for (std::size_t i = 0; i < u.size(); ++i)
      u[i] += spec.class_spread * ex_rng.normal() + clip_nu[i];

    ExampleRecord rec;
    rec.id = idbuf;
    rec.clip_id = clipbuf;
    rec.split = split;
    if (labeled) rec.label = class_name(spec, class_index);

    fs::create_directories(out / rec.id);
    for (Modality m : kAllModalities) {
      const TokenShape& sh = spec.shape(m);
      const Tensor& map = maps[static_cast<int>(m)];
      Tensor tokens = Tensor::zeros({sh.count, sh.width});
      const int flat = sh.count * sh.width;
      for (int r = 0; r < flat; ++r) {
        double acc = 0.0;
        for (int c = 0; c < spec.latent_dim; ++c) acc += map(r, c) * u[c];
        tokens[r] = acc + spec.noise(m) * ex_rng.normal();
      }
      const std::string rel = rec.id + std::string("/") + modality_name(m) + ".mmgt";
      write_tensor((out / rel).string(), tokens, kDtypeF32);
      rec.files[static_cast<int>(m)] = rel;
    }
    manifest.examples.push_back(std::move(rec));
  };

  // Base classes: leading fraction of each class is base-train, rest base-test.
  for (int k = 0; k < spec.num_base_classes; ++k) {
    const int n = spec.examples_per_base_class;
    const int n_test = std::max(1, static_cast<int>(std::lround(n * spec.base_test_fraction)));
    const int n_train = n - n_test;
    if (n_train < 1) throw DataError("dataset spec: base_test_fraction leaves no training data");
    for (int j = 0; j < n; ++j) {
      if (j % spec.clip_group == 0) next_clip();
      emit(k, j < n_train ? Split::kBaseTrain : Split::kBaseTest, true);
    }
  }
  for (int k = 0; k < spec.num_novel_classes; ++k) {
    for (int j = 0; j < spec.examples_per_novel_class; ++j) {
      if (j % spec.clip_group == 0) next_clip();
      emit(spec.num_base_classes + k, Split::kNovel, true);
    }
  }
  Rng pool_rng(mix_seed(spec.seed, "pool"));
  for (int j = 0; j < spec.unlabeled_pool_size; ++j) {
    if (j % spec.clip_group == 0) next_clip();
    const int c = static_cast<int>(
        pool_rng.uniform_int(static_cast<std::uint64_t>(spec.num_base_classes + spec.num_novel_classes)));
    emit(c, Split::kUnlabeled, false);
  }

  // Manifest last, atomically.
  ordered_json j;
  j["schema_version"] = manifest.schema_version;
  j["base_classes"] = manifest.base_classes;
  j["novel_classes"] = manifest.novel_classes;
  j["examples"] = ordered_json::array();
  for (const ExampleRecord& rec : manifest.examples) {
    ordered_json e;
    e["id"] = rec.id;
    e["clip_id"] = rec.clip_id;
    if (rec.label)
      e["label"] = *rec.label;
    else
      e["label"] = nullptr;
    e["split"] = split_name(rec.split);
    e["files"] = {{"video", rec.files[0]}, {"audio", rec.files[1]}, {"imu", rec.files[2]}};
    j["examples"].push_back(std::move(e));
  }
  const fs::path tmp = out / "manifest.json.tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw DataError("dataset: cannot write manifest");
    os << j.dump(2) << '\n';
  }
  fs::rename(tmp, out / "manifest.json");
}

std::vector<SplitViolation> validate_splits(const Manifest& manifest) {
  std::vector<SplitViolation> violations;

  std::set<std::string> base(manifest.base_classes.begin(), manifest.base_classes.end());
  for (const std::string& c : manifest.novel_classes)
    if (base.count(c))
      violations.push_back({"class-overlap", "class '" + c + "' present in both tables"});

  std::map<std::string, std::pair<bool, bool>> clip_sides;  // clip -> (in base, in novel)
  std::set<std::string> train_ids, test_ids;
  for (const ExampleRecord& rec : manifest.examples) {
    auto& sides = clip_sides[rec.clip_id];
    if (rec.split == Split::kBaseTrain || rec.split == Split::kBaseTest) sides.first = true;
    if (rec.split == Split::kNovel) sides.second = true;
    if (rec.split == Split::kBaseTrain) train_ids.insert(rec.id);
    if (rec.split == Split::kBaseTest) test_ids.insert(rec.id);
  }
  for (const auto& [clip, sides] : clip_sides)
    if (sides.first && sides.second)
      violations.push_back({"clip-overlap", "clip '" + clip + "' spans base and novel"});
  for (const std::string& id : train_ids)
    if (test_ids.count(id))
      violations.push_back({"example-overlap", "example '" + id + "' in base-train and base-test"});

  return violations;
}

Dataset Dataset::load(const std::string& dir) {
  Dataset ds;
  ds.root_ = dir;
  const fs::path manifest_path = fs::path(dir) / "manifest.json";
  std::ifstream is(manifest_path);
  if (!is) throw DataError("dataset: missing manifest at '" + manifest_path.string() + "'");
  ordered_json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    throw DataError(std::string("dataset: manifest parse error: ") + e.what());
  }

  Manifest& m = ds.manifest_;
  try {
    m.schema_version = j.at("schema_version").get<int>();
    m.base_classes = j.at("base_classes").get<std::vector<std::string>>();
    m.novel_classes = j.at("novel_classes").get<std::vector<std::string>>();
    for (const auto& e : j.at("examples")) {
      ExampleRecord rec;
      rec.id = e.at("id").get<std::string>();
      rec.clip_id = e.at("clip_id").get<std::string>();
      if (!e.at("label").is_null()) rec.label = e.at("label").get<std::string>();
      rec.split = split_from_name(e.at("split").get<std::string>());
      for (Modality mod : kAllModalities)
        rec.files[static_cast<int>(mod)] = e.at("files").at(modality_name(mod)).get<std::string>();
      m.examples.push_back(std::move(rec));
    }
  } catch (const ordered_json::exception& e) {
    throw DataError(std::string("dataset: malformed manifest: ") + e.what());
  }
  if (m.schema_version != 1)
    throw DataError("dataset: unsupported schema version " + std::to_string(m.schema_version));

  std::map<std::string, int> base_idx, novel_idx;
  for (std::size_t i = 0; i < m.base_classes.size(); ++i)
    base_idx[m.base_classes[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < m.novel_classes.size(); ++i)
    novel_idx[m.novel_classes[i]] = static_cast<int>(i);

  ds.by_class_[static_cast<int>(Split::kBaseTrain)].resize(m.base_classes.size());
  ds.by_class_[static_cast<int>(Split::kBaseTest)].resize(m.base_classes.size());
  ds.by_class_[static_cast<int>(Split::kNovel)].resize(m.novel_classes.size());

  std::set<std::string> seen_ids;
  for (int i = 0; i < static_cast<int>(m.examples.size()); ++i) {
    const ExampleRecord& rec = m.examples[i];
    if (!seen_ids.insert(rec.id).second)
      throw DataError("dataset: duplicate example id '" + rec.id + "'");
    for (Modality mod : kAllModalities) {
      const fs::path p = fs::path(dir) / rec.files[static_cast<int>(mod)];
      if (!fs::exists(p)) throw DataError("dataset: missing tensor file '" + p.string() + "'");
    }
    int label = -1;
    if (rec.split == Split::kBaseTrain || rec.split == Split::kBaseTest) {
      if (!rec.label || !base_idx.count(*rec.label))
        throw DataError("dataset: example '" + rec.id + "' label outside base class table");
      label = base_idx[*rec.label];
    } else if (rec.split == Split::kNovel) {
      if (!rec.label || !novel_idx.count(*rec.label))
        throw DataError("dataset: example '" + rec.id + "' label outside novel class table");
      label = novel_idx[*rec.label];
    } else if (rec.label) {
      throw DataError("dataset: unlabeled example '" + rec.id + "' carries a label");
    }
    ds.label_index_.push_back(label);
    ds.split_indices_[static_cast<int>(rec.split)].push_back(i);
    if (label >= 0) ds.by_class_[static_cast<int>(rec.split)][label].push_back(i);
  }
  return ds;
}

const ExampleRecord& Dataset::example(int idx) const {
  if (idx < 0 || idx >= size()) throw DataError("dataset: example index out of range");
  return manifest_.examples[idx];
}

const std::vector<int>& Dataset::split_indices(Split s) const {
  return split_indices_[static_cast<int>(s)];
}

int Dataset::label_index(int idx) const {
  if (idx < 0 || idx >= size()) throw DataError("dataset: example index out of range");
  return label_index_[idx];
}

Tensor Dataset::tokens(int idx, Modality m) const {
  const ExampleRecord& rec = example(idx);
  const std::pair<int, int> key{idx, static_cast<int>(m)};
  std::lock_guard<std::mutex> lock(cache_->mu);
  cache_->log[{rec.split, m}] += 1;
  auto it = cache_->tensors.find(key);
  if (it != cache_->tensors.end()) return it->second;
  Tensor t = read_tensor((fs::path(root_) / rec.files[static_cast<int>(m)]).string());
  cache_->tensors.emplace(key, t);
  return t;
}

TokenShape Dataset::token_shape(Modality m) const {
  if (manifest_.examples.empty()) throw DataError("dataset: empty dataset");
  const Tensor t =
      read_tensor((fs::path(root_) / manifest_.examples[0].files[static_cast<int>(m)]).string());
  if (t.rank() != 2) throw DataError("dataset: token tensors must be rank 2");
  return {t.rows(), t.cols()};
}

const std::vector<std::vector<int>>& Dataset::by_class(Split s) const {
  if (s == Split::kUnlabeled) throw DataError("dataset: unlabeled pool has no class table");
  return by_class_[static_cast<int>(s)];
}

void Dataset::prefetch(Split s) const {
  for (int idx : split_indices(s))
    for (Modality m : kAllModalities) tokens(idx, m);
}

Dataset::AccessLog Dataset::access_log() const {
  std::lock_guard<std::mutex> lock(cache_->mu);
  return cache_->log;
}

void Dataset::reset_access_log() const {
  std::lock_guard<std::mutex> lock(cache_->mu);
  cache_->log.clear();
}

}  // namespace xmodal
