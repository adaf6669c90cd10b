// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "test_support.hpp"
#include "xmodal/adam.hpp"
#include "xmodal/dataset.hpp"
#include "xmodal/errors.hpp"
#include "xmodal/kernels.hpp"
#include "xmodal/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace xmodal;
using xtest::rand_tensor;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("xmodal_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

DatasetSpec tiny_spec(std::uint64_t seed = 1) {
  DatasetSpec s = DatasetSpec::desk_default();
  s.num_base_classes = 6;
  s.num_novel_classes = 3;
  s.examples_per_base_class = 16;
  s.examples_per_novel_class = 8;
  s.unlabeled_pool_size = 12;
  s.seed = seed;
  return s;
}

// Multinomial logistic regression on flattened tokens; the reference
// classifier for separability checks.
struct ProbeResult {
  double train_accuracy;
  double test_accuracy;
};

ProbeResult linear_probe(const Dataset& ds, Modality m, int steps = 120, double lr = 0.05) {
  const int C = ds.num_base_classes();
  const auto& train = ds.split_indices(Split::kBaseTrain);
  const auto& test = ds.split_indices(Split::kBaseTest);
  const Tensor first = ds.tokens(train[0], m);
  const int F = static_cast<int>(first.size());

  auto flatten = [&](int idx) {
    const Tensor t = ds.tokens(idx, m);
    std::vector<double> v(t.data(), t.data() + t.size());
    return Tensor({F}, std::move(v));
  };

  ParamStore params;
  params["w"] = Tensor::zeros({F, C});
  params["b"] = Tensor::zeros({C});
  AdamState state;
  AdamConfig adam;
  adam.lr = lr;
  for (int step = 0; step < steps; ++step) {
    Graph g;
    const NodeId w = g.param("w", params["w"]);
    const NodeId b = g.param("b", params["b"]);
    std::vector<NodeId> terms;
    for (int idx : train) {
      const NodeId logits = g.add(g.matmul(g.constant(flatten(idx)), w), b);
      terms.push_back(g.cross_entropy(logits, ds.label_index(idx)));
    }
    const NodeId loss = g.scale(g.add_n(terms), 1.0 / terms.size());
    g.forward();
    g.backward(loss);
    adam_step(params, g.grads_by_name(), state, adam);
  }

  auto accuracy = [&](const std::vector<int>& idxs) {
    int correct = 0;
    for (int idx : idxs) {
      const Tensor logits = k_add(k_matmul(flatten(idx), params["w"]), params["b"]);
      int best = 0;
      for (int c = 1; c < C; ++c)
        if (logits[c] > logits[best]) best = c;
      if (best == ds.label_index(idx)) ++correct;
    }
    return static_cast<double>(correct) / idxs.size();
  };
  return {accuracy(train), accuracy(test)};
}

// Least squares via normal equations; recovers the latent from noiseless
// tokens given the generator's map.
Tensor solve_latent(const Tensor& map, const Tensor& tokens_flat) {
  const int F = map.rows(), L = map.cols();
  Tensor ata = Tensor::zeros({L, L});
  Tensor atb = Tensor::zeros({L});
  for (int i = 0; i < L; ++i) {
    for (int j = 0; j < L; ++j) {
      double s = 0;
      for (int r = 0; r < F; ++r) s += map(r, i) * map(r, j);
      ata(i, j) = s;
    }
    double s = 0;
    for (int r = 0; r < F; ++r) s += map(r, i) * tokens_flat[r];
    atb[i] = s;
  }
  // Gauss-Jordan with partial pivoting.
  std::vector<std::vector<double>> a(L, std::vector<double>(L + 1));
  for (int i = 0; i < L; ++i) {
    for (int j = 0; j < L; ++j) a[i][j] = ata(i, j);
    a[i][L] = atb[i];
  }
  for (int col = 0; col < L; ++col) {
    int pivot = col;
    for (int r = col + 1; r < L; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    std::swap(a[col], a[pivot]);
    for (int r = 0; r < L; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (int j = col; j <= L; ++j) a[r][j] -= f * a[col][j];
    }
  }
  Tensor u = Tensor::zeros({L});
  for (int i = 0; i < L; ++i) u[i] = a[i][L] / a[i][i];
  return u;
}

bool same_file_bytes(const fs::path& a, const fs::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  const std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  return sa == sb;
}

}  // namespace

TEST_CASE("mmgt tensors round-trip") {
  const fs::path dir = temp_dir("io");
  Rng rng(1);

  SUBCASE("float32 payload round-trips bit-exactly") {
    for (int rep = 0; rep < 20; ++rep) {
      const Tensor t = rand_tensor({1 + static_cast<int>(rng.uniform_int(5)),
                                    1 + static_cast<int>(rng.uniform_int(7))},
                                   rng, 3.0);
      const std::string path = (dir / "t.mmgt").string();
      write_tensor(path, t, kDtypeF32);
      const Tensor back = read_tensor(path);
      REQUIRE(back.dims() == t.dims());
      for (std::size_t i = 0; i < t.size(); ++i)
        CHECK(back[i] == static_cast<double>(static_cast<float>(t[i])));
      // a second write-read of the already-quantized tensor is bit-identical
      write_tensor(path, back, kDtypeF32);
      CHECK(read_tensor(path).bit_equal(back));
    }
  }

  SUBCASE("float64 checkpoint payload is bit-exact") {
    const Tensor t = rand_tensor({4, 5}, rng);
    const std::string path = (dir / "t64.mmgt").string();
    write_tensor(path, t, kDtypeF64);
    CHECK(read_tensor(path).bit_equal(t));
  }

  SUBCASE("rank-0 scalar round-trips") {
    const std::string path = (dir / "s.mmgt").string();
    write_tensor(path, Tensor::scalar(-2.5), kDtypeF64);
    const Tensor back = read_tensor(path);
    CHECK(back.rank() == 0);
    CHECK(back.scalar_value() == -2.5);
  }

  SUBCASE("corrupted magic, truncation, dim overflow, unknown dtype") {
    const std::string path = (dir / "bad.mmgt").string();
    write_tensor(path, Tensor({2}, {1.0, 2.0}), kDtypeF32);
    std::string bytes;
    {
      std::ifstream is(path, std::ios::binary);
      bytes.assign((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    }
    auto rewrite = [&](std::string mutated) {
      std::ofstream os(path, std::ios::binary | std::ios::trunc);
      os << mutated;
    };
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    rewrite(bad_magic);
    CHECK_THROWS_WITH_AS(read_tensor(path), "mmgt: bad magic", DataError);

    rewrite(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_WITH_AS(read_tensor(path), "mmgt: truncated payload", DataError);

    std::string bad_dim = bytes;
    bad_dim[7] = '\xff';  // dims little-endian: blow past the sanity bound
    bad_dim[8] = '\xff';
    bad_dim[9] = '\xff';
    bad_dim[10] = '\xff';
    rewrite(bad_dim);
    CHECK_THROWS_WITH_AS(read_tensor(path), "mmgt: dims overflow", DataError);

    std::string bad_dtype = bytes;
    bad_dtype[5] = 9;
    rewrite(bad_dtype);
    CHECK_THROWS_WITH_AS(read_tensor(path), "mmgt: unknown dtype code 9", DataError);
  }
}

TEST_CASE("generation is deterministic byte-for-byte") {
  const DatasetSpec spec = tiny_spec(77);
  const fs::path a = temp_dir("gen_a");
  const fs::path b = temp_dir("gen_b");
  generate_synthetic(spec, a.string());
  generate_synthetic(spec, b.string());

  int files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    ++files;
    const fs::path rel = fs::relative(entry.path(), a);
    CHECK(same_file_bytes(entry.path(), b / rel));
  }
  CHECK(files == (6 * 16 + 3 * 8 + 12) * 3 + 1);  // tensors plus manifest
}

TEST_CASE("loading exposes splits, labels and manifest order") {
  const DatasetSpec spec = tiny_spec(5);
  const fs::path dir = temp_dir("load");
  generate_synthetic(spec, dir.string());
  const Dataset ds = Dataset::load(dir.string());

  CHECK(ds.size() == 6 * 16 + 3 * 8 + 12);
  CHECK(ds.num_base_classes() == 6);
  CHECK(ds.num_novel_classes() == 3);
  const int n_test_per_class = 4;  // round(16 * 0.25)
  CHECK(static_cast<int>(ds.split_indices(Split::kBaseTrain).size()) ==
        6 * (16 - n_test_per_class));
  CHECK(static_cast<int>(ds.split_indices(Split::kBaseTest).size()) == 6 * n_test_per_class);
  CHECK(static_cast<int>(ds.split_indices(Split::kNovel).size()) == 3 * 8);
  CHECK(static_cast<int>(ds.split_indices(Split::kUnlabeled).size()) == 12);

  // manifest order is generation order
  for (int i = 1; i < ds.size(); ++i) CHECK(ds.example(i - 1).id < ds.example(i).id);

  // unlabeled pool carries no labels
  for (int idx : ds.split_indices(Split::kUnlabeled)) {
    CHECK_FALSE(ds.example(idx).label.has_value());
    CHECK(ds.label_index(idx) == -1);
  }

  // clip grouping: examples of one class share clips in groups of clip_group
  const auto& by_class = ds.by_class(Split::kNovel);
  const std::vector<int>& cls0 = by_class[0];
  CHECK(ds.example(cls0[0]).clip_id == ds.example(cls0[3]).clip_id);
  CHECK(ds.example(cls0[0]).clip_id != ds.example(cls0[4]).clip_id);
}

TEST_CASE("load rejects broken datasets") {
  const DatasetSpec spec = tiny_spec(6);

  SUBCASE("missing tensor file is reported with its path") {
    const fs::path dir = temp_dir("missing");
    generate_synthetic(spec, dir.string());
    const Dataset ds = Dataset::load(dir.string());
    const std::string victim = ds.example(3).files[1];
    fs::remove(dir / victim);
    try {
      Dataset::load(dir.string());
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find(victim) != std::string::npos);
    }
  }

  SUBCASE("duplicate example id rejected") {
    const fs::path dir = temp_dir("dup");
    generate_synthetic(spec, dir.string());
    nlohmann::ordered_json j;
    {
      std::ifstream is(dir / "manifest.json");
      is >> j;
    }
    j["examples"].push_back(j["examples"][0]);
    {
      std::ofstream os(dir / "manifest.json", std::ios::trunc);
      os << j.dump(2);
    }
    CHECK_THROWS_AS(Dataset::load(dir.string()), DataError);
  }

  SUBCASE("label outside the split's class table rejected") {
    const fs::path dir = temp_dir("badlabel");
    generate_synthetic(spec, dir.string());
    nlohmann::ordered_json j;
    {
      std::ifstream is(dir / "manifest.json");
      is >> j;
    }
    j["examples"][0]["label"] = "novel_00";  // base split example
    {
      std::ofstream os(dir / "manifest.json", std::ios::trunc);
      os << j.dump(2);
    }
    CHECK_THROWS_AS(Dataset::load(dir.string()), DataError);
  }

  SUBCASE("hand-built two-example manifest loads and iterates in order") {
    const fs::path dir = temp_dir("hand");
    fs::create_directories(dir / "x1");
    fs::create_directories(dir / "x2");
    Rng rng(3);
    for (const char* id : {"x1", "x2"})
      for (Modality m : kAllModalities)
        write_tensor((dir / id / (std::string(modality_name(m)) + ".mmgt")).string(),
                     rand_tensor({2, 3}, rng), kDtypeF32);
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["base_classes"] = {"a", "b"};
    j["novel_classes"] = {"n0", "n1"};
    j["examples"] = nlohmann::ordered_json::array();
    int i = 0;
    for (const char* id : {"x1", "x2"}) {
      nlohmann::ordered_json e;
      e["id"] = id;
      e["clip_id"] = "c" + std::to_string(i++);
      e["label"] = "a";
      e["split"] = "base-train";
      e["files"] = {{"video", std::string(id) + "/video.mmgt"},
                    {"audio", std::string(id) + "/audio.mmgt"},
                    {"imu", std::string(id) + "/imu.mmgt"}};
      j["examples"].push_back(e);
    }
    {
      std::ofstream os(dir / "manifest.json");
      os << j.dump(2);
    }
    const Dataset ds = Dataset::load(dir.string());
    CHECK(ds.size() == 2);
    CHECK(ds.example(0).id == "x1");
    CHECK(ds.example(1).id == "x2");
    CHECK(ds.tokens(0, Modality::kVideo).dims() == std::vector<int>{2, 3});
  }
}

TEST_CASE("validate_splits") {
  const DatasetSpec spec = tiny_spec(9);
  const fs::path dir = temp_dir("splits");
  generate_synthetic(spec, dir.string());
  Dataset ds = Dataset::load(dir.string());

  SUBCASE("generated data is clean") { CHECK(validate_splits(ds.manifest()).empty()); }

  SUBCASE("injected clip overlap is the only violation") {
    Manifest m = ds.manifest();
    std::string base_clip;
    for (const ExampleRecord& rec : m.examples)
      if (rec.split == Split::kBaseTrain) {
        base_clip = rec.clip_id;
        break;
      }
    for (ExampleRecord& rec : m.examples)
      if (rec.split == Split::kNovel) {
        rec.clip_id = base_clip;
        break;
      }
    const auto violations = validate_splits(m);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].type == "clip-overlap");
  }

  SUBCASE("injected class-table overlap detected") {
    Manifest m = ds.manifest();
    m.novel_classes.push_back(m.base_classes[0]);
    const auto violations = validate_splits(m);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].type == "class-overlap");
  }

  SUBCASE("example in both base splits detected") {
    Manifest m = ds.manifest();
    ExampleRecord dup;
    for (const ExampleRecord& rec : m.examples)
      if (rec.split == Split::kBaseTrain) {
        dup = rec;
        break;
      }
    dup.split = Split::kBaseTest;
    m.examples.push_back(dup);
    const auto violations = validate_splits(m);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].type == "example-overlap");
  }
}

TEST_CASE("noise-free data is perfectly separable by a linear probe") {
  DatasetSpec spec = tiny_spec(11);
  spec.noise_scales = {0.0, 0.0, 0.0};
  spec.class_spread = 0.0;
  spec.clip_noise = 0.0;
  const fs::path dir = temp_dir("sep");
  generate_synthetic(spec, dir.string());
  const Dataset ds = Dataset::load(dir.string());
  const ProbeResult r = linear_probe(ds, Modality::kVideo, 60, 0.2);
  CHECK(r.train_accuracy == doctest::Approx(1.0));
}

TEST_CASE("per-modality noise ordering shows up in probe accuracy") {
  DatasetSpec spec = DatasetSpec::desk_default();  // 20 base classes
  spec.examples_per_base_class = 24;
  spec.examples_per_novel_class = 8;
  spec.unlabeled_pool_size = 12;
  spec.seed = 13;
  spec.noise_scales = {0.1, 0.5, 1.0};  // video, audio, imu
  const fs::path dir = temp_dir("order");
  generate_synthetic(spec, dir.string());
  const Dataset ds = Dataset::load(dir.string());
  const double video = linear_probe(ds, Modality::kVideo).test_accuracy;
  const double audio = linear_probe(ds, Modality::kAudio).test_accuracy;
  const double imu = linear_probe(ds, Modality::kImu).test_accuracy;
  INFO("video=", video, " audio=", audio, " imu=", imu);
  CHECK(video > audio);
  CHECK(audio > imu);
}

TEST_CASE("all three modalities decode to the same latent at zero noise") {
  DatasetSpec spec = tiny_spec(15);
  spec.noise_scales = {0.0, 0.0, 0.0};
  const fs::path dir = temp_dir("latent");
  generate_synthetic(spec, dir.string());
  const Dataset ds = Dataset::load(dir.string());

  for (int idx : {0, 5, 40}) {
    std::vector<Tensor> recovered;
    for (Modality m : kAllModalities) {
      const Tensor map = generator_modality_map(spec, m);
      const Tensor tokens = ds.tokens(idx, m);
      std::vector<double> flat(tokens.data(), tokens.data() + tokens.size());
      recovered.push_back(solve_latent(map, Tensor({static_cast<int>(flat.size())}, flat)));
    }
    for (int d = 0; d < spec.latent_dim; ++d) {
      CHECK(std::fabs(recovered[0][d] - recovered[1][d]) <= 1e-5);
      CHECK(std::fabs(recovered[0][d] - recovered[2][d]) <= 1e-5);
    }
  }
}

TEST_CASE("dataset spec json round-trips and validates") {
  const DatasetSpec spec = tiny_spec(21);
  const DatasetSpec back = dataset_spec_from_json_text(dataset_spec_to_json_text(spec));
  CHECK(back.num_base_classes == spec.num_base_classes);
  CHECK(back.seed == spec.seed);
  CHECK(back.noise(Modality::kAudio) == spec.noise(Modality::kAudio));
  CHECK(back.shape(Modality::kImu).count == spec.shape(Modality::kImu).count);

  CHECK_THROWS_AS(dataset_spec_from_json_text("{\"num_base_classes\": 1}"), DataError);
  CHECK_THROWS_AS(dataset_spec_from_json_text("not json"), DataError);
}

TEST_CASE("access log records reads by split and modality") {
  const DatasetSpec spec = tiny_spec(23);
  const fs::path dir = temp_dir("log");
  generate_synthetic(spec, dir.string());
  const Dataset ds = Dataset::load(dir.string());
  ds.reset_access_log();
  ds.tokens(ds.split_indices(Split::kNovel)[0], Modality::kAudio);
  ds.tokens(ds.split_indices(Split::kNovel)[0], Modality::kAudio);
  ds.tokens(ds.split_indices(Split::kBaseTrain)[0], Modality::kVideo);
  const auto log = ds.access_log();
  CHECK(log.at({Split::kNovel, Modality::kAudio}) == 2);
  CHECK(log.at({Split::kBaseTrain, Modality::kVideo}) == 1);
  CHECK(log.count({Split::kBaseTest, Modality::kImu}) == 0);
}
