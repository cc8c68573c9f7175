// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "oracle.hpp"
#include "promptmil/common/error.hpp"
#include "promptmil/common/rng.hpp"
#include "promptmil/io/binary_format.hpp"
#include "promptmil/io/kshot.hpp"
#include "promptmil/io/manifest.hpp"
#include "promptmil/io/synthetic.hpp"
#include "promptmil/losses/metrics.hpp"

using namespace promptmil;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "promptmil-test-io" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

// Reads the header fields straight from the bytes.
template <typename T>
T field(const std::string& bytes, std::size_t offset) {
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return v;
}

Tensor f32_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Tensor t = oracle::random_matrix(rng, rows, cols);
  for (auto& v : t.data()) v = static_cast<double>(static_cast<float>(v));
  return t;
}

std::map<fs::path, std::string> tree(const fs::path& root) {
  std::map<fs::path, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root)] = slurp(e.path());
  }
  return out;
}

io::Manifest pool_manifest(std::size_t per_class) {
  io::Manifest m;
  m.classes = {"a", "b"};
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      io::ManifestEntry e;
      e.id = "c" + std::to_string(c) + "-" + std::to_string(i);
      e.label = c;
      m.entries.push_back(e);
    }
    io::ManifestEntry t;
    t.id = "test" + std::to_string(c);
    t.label = c;
    t.split = io::Split::kTest;
    m.entries.push_back(t);
  }
  return m;
}

}  // namespace

TEST_CASE("PBAG round trip and layout") {
  const auto dir = scratch("pbag");
  Rng rng(1);
  io::Bag bag{f32_matrix(rng, 1, 4), 1, 3.25, true};
  io::write_bag(dir / "a.pbag", bag);
  const io::Bag back = io::read_bag(dir / "a.pbag");
  CHECK(back.features == bag.features);
  CHECK(back.label == 1);
  CHECK(back.time == 3.25);
  CHECK(back.event);

  const std::string bytes = slurp(dir / "a.pbag");
  CHECK(bytes.size() == 28 + 16);
  CHECK(bytes.substr(0, 4) == "PBAG");
  CHECK(field<std::uint32_t>(bytes, 4) == 1);
  CHECK(field<std::uint32_t>(bytes, 8) == 4);
  CHECK(field<std::uint32_t>(bytes, 12) == 1);
  CHECK(field<std::uint32_t>(bytes, 16) == 1);
  CHECK(field<float>(bytes, 20) == 3.25f);
  CHECK(static_cast<unsigned char>(bytes[24]) == 1);
  CHECK(bytes.substr(25, 3) == std::string(3, '\0'));
  CHECK(field<float>(bytes, 28) == static_cast<float>(bag.features(0, 0)));
  CHECK(field<float>(bytes, 40) == static_cast<float>(bag.features(0, 3)));

  SUBCASE("rewriting a read bag is byte-identical") {
    io::Bag big{f32_matrix(rng, 37, 9), 0, 0.5, false};
    io::write_bag(dir / "b.pbag", big);
    io::write_bag(dir / "c.pbag", io::read_bag(dir / "b.pbag"));
    CHECK(slurp(dir / "b.pbag") == slurp(dir / "c.pbag"));
  }
  SUBCASE("size arithmetic") {
    CHECK(io::bag_file_size(1000, 512) == 28 + 2048000);
    CHECK(io::embedding_file_size(3, 8) == 20 + 96);
    io::Bag large{Tensor(1000, 512, 0.25), 0, 1.0, true};
    io::write_bag(dir / "large.pbag", large);
    CHECK(fs::file_size(dir / "large.pbag") == 2048028);
  }
}

TEST_CASE("PBAG validation") {
  const auto dir = scratch("pbag-bad");
  Rng rng(2);
  io::write_bag(dir / "ok.pbag", io::Bag{f32_matrix(rng, 5, 3), 0, 1.0, false});
  const std::string good = slurp(dir / "ok.pbag");

  SUBCASE("truncated payload names both lengths") {
    spit(dir / "t.pbag", good.substr(0, good.size() - 4));
    try {
      io::read_bag(dir / "t.pbag");
      FAIL("expected an error");
    } catch (const FormatError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("expected 88") != std::string::npos);
      CHECK(msg.find("got 84") != std::string::npos);
    }
  }
  SUBCASE("short header") {
    spit(dir / "h.pbag", good.substr(0, 10));
    CHECK_THROWS_AS(io::read_bag(dir / "h.pbag"), FormatError);
  }
  SUBCASE("magic") {
    std::string bad = good;
    bad[0] = 'X';
    spit(dir / "m.pbag", bad);
    CHECK_THROWS_AS(io::read_bag(dir / "m.pbag"), FormatError);
    spit(dir / "m.pbag", "PEB1" + good.substr(4));
    CHECK_THROWS_AS(io::read_bag(dir / "m.pbag"), FormatError);
  }
  SUBCASE("version") {
    std::string bad = good;
    bad[4] = 2;
    spit(dir / "v.pbag", bad);
    CHECK_THROWS_AS(io::read_bag(dir / "v.pbag"), FormatError);
  }
  SUBCASE("trailing bytes") {
    spit(dir / "x.pbag", good + "z");
    CHECK_THROWS_AS(io::read_bag(dir / "x.pbag"), FormatError);
  }
  SUBCASE("event flag and dimension") {
    std::string bad = good;
    bad[24] = 2;
    spit(dir / "e.pbag", bad);
    CHECK_THROWS_AS(io::read_bag(dir / "e.pbag"), FormatError);
    CHECK_THROWS_AS(io::read_bag(dir / "ok.pbag", 4), FormatError);
    CHECK_NOTHROW(io::read_bag(dir / "ok.pbag", 3));
  }
  SUBCASE("missing file and empty bag") {
    CHECK_THROWS_AS(io::read_bag(dir / "none.pbag"), FormatError);
    CHECK_THROWS_AS(io::write_bag(dir / "z.pbag", io::Bag{Tensor(0, 3), 0, 1.0, false}), ValidationError);
  }
}

TEST_CASE("PEB1 round trip and validation") {
  const auto dir = scratch("peb1");
  Rng rng(3);
  const Tensor rows = f32_matrix(rng, 6, 5);
  io::write_embeddings(dir / "e.peb1", rows);
  CHECK(io::read_embeddings(dir / "e.peb1") == rows);
  const std::string bytes = slurp(dir / "e.peb1");
  CHECK(bytes.size() == 20 + 4 * 30);
  CHECK(bytes.substr(0, 4) == "PEB1");
  CHECK(field<std::uint32_t>(bytes, 8) == 5);
  CHECK(field<std::uint64_t>(bytes, 12) == 6);
  io::write_embeddings(dir / "f.peb1", io::read_embeddings(dir / "e.peb1"));
  CHECK(slurp(dir / "f.peb1") == bytes);

  spit(dir / "t.peb1", bytes.substr(0, bytes.size() - 1));
  CHECK_THROWS_AS(io::read_embeddings(dir / "t.peb1"), FormatError);
  std::string zero = bytes.substr(0, 20);
  std::memset(zero.data() + 12, 0, 8);
  spit(dir / "z.peb1", zero);
  CHECK_THROWS_AS(io::read_embeddings(dir / "z.peb1"), FormatError);
  std::string huge = bytes;
  const std::uint64_t count = 1ULL << 62;
  std::memcpy(huge.data() + 12, &count, 8);
  spit(dir / "h.peb1", huge);
  CHECK_THROWS_AS(io::read_embeddings(dir / "h.peb1"), FormatError);
  CHECK_THROWS_AS(io::read_embeddings(dir / "e.peb1", 4), FormatError);
}

TEST_CASE("manifest validation") {
  const auto dir = scratch("manifest");
  io::SyntheticConfig cfg;
  cfg.dim = 8;
  cfg.train_per_class = 3;
  cfg.test_per_class = 2;
  cfg.min_patches = 4;
  cfg.max_patches = 6;
  const io::Manifest m = io::generate_synthetic(cfg, dir);
  const std::string text = io::manifest_to_json(m);
  const io::Manifest again = io::parse_manifest(text, dir);
  CHECK(io::manifest_to_json(again) == text);
  CHECK(io::load_manifest(dir / "manifest.json").entries.size() == 10);

  const auto mutate = [&](const std::string& from, const std::string& to) {
    std::string t = text;
    const auto pos = t.find(from);
    REQUIRE(pos != std::string::npos);
    t.replace(pos, from.size(), to);
    return t;
  };
  CHECK_THROWS_AS(io::parse_manifest("{", dir), ValidationError);
  CHECK_THROWS_AS(io::parse_manifest(mutate("\"train-c0-1\"", "\"train-c0-0\""), dir), ValidationError);
  CHECK_THROWS_AS(io::parse_manifest(mutate("\"label\": 1", "\"label\": 7"), dir), ValidationError);
  CHECK_THROWS_AS(io::parse_manifest(mutate("bags/train-c0-0.pbag", "bags/missing.pbag"), dir), ValidationError);
  CHECK_NOTHROW(io::parse_manifest(mutate("bags/train-c0-0.pbag", "bags/missing.pbag"), dir, false));
  CHECK_THROWS_AS(io::parse_manifest(mutate("\"split\": \"test\"", "\"split\": \"holdout\""), dir),
                  ValidationError);

  io::Manifest no_test = m;
  for (auto& e : no_test.entries) e.split = io::Split::kTrainPool;
  CHECK_THROWS_AS(io::parse_manifest(io::manifest_to_json(no_test), dir), ValidationError);

  io::Manifest leak = m;
  leak.slide_examples.front().bag.clear();
  leak.slide_examples.front().id = leak.entries.back().id;
  REQUIRE(leak.entries.back().split == io::Split::kTest);
  CHECK_THROWS_AS(io::parse_manifest(io::manifest_to_json(leak), dir), ValidationError);
}

TEST_CASE("synthetic generation is deterministic") {
  io::SyntheticConfig cfg;
  cfg.dim = 8;
  cfg.train_per_class = 4;
  cfg.test_per_class = 3;
  cfg.min_patches = 5;
  cfg.max_patches = 9;
  const auto a = scratch("syn-a");
  const auto b = scratch("syn-b");
  io::generate_synthetic(cfg, a);
  io::generate_synthetic(cfg, b);
  CHECK(tree(a) == tree(b));
  cfg.seed = 1;
  const auto c = scratch("syn-c");
  io::generate_synthetic(cfg, c);
  CHECK(tree(a) != tree(c));
  CHECK(io::synthetic_config_from_json(slurp(c / "synthetic_config.json")).seed == 1);
}

TEST_CASE("synthetic invariants") {
  io::SyntheticConfig cfg;
  cfg.dim = 16;
  cfg.num_classes = 3;
  cfg.train_per_class = 5;
  cfg.test_per_class = 5;
  cfg.min_patches = 10;
  cfg.max_patches = 20;
  const auto dir = scratch("syn-inv");
  const io::Manifest m = io::generate_synthetic(cfg, dir);
  std::set<std::string> test_ids;
  for (const auto& e : m.entries) {
    const io::Bag bag = io::read_bag(m.resolve(e.bag));
    CHECK(bag.features.rows() >= 10);
    CHECK(bag.features.rows() <= 20);
    CHECK(bag.label == e.label);
    CHECK(*e.time > 0.0);
    CHECK(bag.time == *e.time);
    CHECK(bag.event == *e.event);
    CHECK_FALSE(e.key_patches.empty());
    if (e.split == io::Split::kTest) test_ids.insert(e.id);
  }
  for (const auto& s : m.slide_examples) CHECK_FALSE(test_ids.contains(s.id));
  CHECK(m.patch_tags.size() == 9);
}

TEST_CASE("noise-free planted bags reproduce their prototypes") {
  io::SyntheticConfig cfg;
  cfg.dim = 8;
  cfg.noise = 0.0;
  cfg.bank_noise = 0.0;
  cfg.prevalence = {1.0};
  cfg.train_per_class = 3;
  cfg.test_per_class = 2;
  cfg.min_patches = 6;
  cfg.max_patches = 6;
  const auto dir = scratch("syn-clean");
  const io::Manifest m = io::generate_synthetic(cfg, dir);
  const Tensor bank = io::read_embeddings(m.resolve(m.patch_bank));
  for (const auto& e : m.entries) {
    const io::Bag bag = io::read_bag(m.resolve(e.bag));
    CHECK(e.key_patches.size() == bag.features.rows());
    for (std::size_t r = 0; r < bag.features.rows(); ++r) {
      // The noise-free bank holds each prototype once per class at f32.
      bool found = false;
      for (std::size_t k = 0; k < bank.rows(); ++k) {
        if (m.patch_tags[k] != e.label) continue;
        double worst = 0.0;
        for (std::size_t c = 0; c < 8; ++c) worst = std::max(worst, std::abs(bank(k, c) - bag.features(r, c)));
        found = found || worst < 1e-6;
      }
      CHECK(found);
    }
  }
}

TEST_CASE("synthetic config validation and JSON") {
  io::SyntheticConfig cfg;
  CHECK(io::synthetic_config_from_json(io::synthetic_config_to_json(cfg)).noise == cfg.noise);
  auto bad = cfg;
  bad.prevalence = {0.0};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad.prevalence = {1.5};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.dim = 3;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.prevalence = {0.1, 0.2, 0.3};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.background_per_bag = bad.background_patterns + 1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  CHECK_THROWS_AS(io::synthetic_config_from_json("{\"nosie\": 0.1}"), ValidationError);
}

TEST_CASE("default synthetic task is learnable by a nearest-prototype rule") {
  const auto dir = scratch("syn-default");
  const io::Manifest m = io::generate_synthetic(io::SyntheticConfig{}, dir);
  const auto bag_mean = [&](const io::ManifestEntry& e) {
    const io::Bag bag = io::read_bag(m.resolve(e.bag));
    std::vector<double> mean(bag.features.cols(), 0.0);
    for (std::size_t r = 0; r < bag.features.rows(); ++r) {
      for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += bag.features(r, c);
    }
    return oracle::normalized(mean);
  };
  std::vector<std::vector<double>> centroid(2, std::vector<double>(m.dim, 0.0));
  for (const auto& e : m.entries) {
    if (e.split != io::Split::kTrainPool) continue;
    const auto mean = bag_mean(e);
    for (std::size_t c = 0; c < m.dim; ++c) centroid[e.label][c] += mean[c];
  }
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& e : m.entries) {
    if (e.split != io::Split::kTest) continue;
    const auto mean = bag_mean(e);
    scores.push_back(oracle::cosine(mean, centroid[1]) - oracle::cosine(mean, centroid[0]));
    labels.push_back(static_cast<int>(e.label));
  }
  CHECK(scores.size() == 200);
  const double auc = losses::auc(scores, labels);
  MESSAGE("nearest-prototype AUC " << auc);
  CHECK(auc > 0.9);
}

TEST_CASE("K-shot sampling") {
  const io::Manifest m = pool_manifest(10);
  SUBCASE("exactly K per class from the train pool") {
    const auto s = io::kshot_sample(m, 3, 7);
    REQUIRE(s.size() == 6);
    std::map<std::size_t, int> per_class;
    for (std::size_t i : s) {
      CHECK(m.entries[i].split == io::Split::kTrainPool);
      ++per_class[m.entries[i].label];
    }
    CHECK(per_class[0] == 3);
    CHECK(per_class[1] == 3);
    CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 6);
    CHECK(io::kshot_sample(m, 3, 7) == s);
  }
  SUBCASE("K equal to the pool takes everything") {
    for (std::uint64_t seed : {0u, 1u, 99u}) {
      const auto s = io::kshot_sample(m, 10, seed);
      CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 20);
    }
  }
  SUBCASE("insufficient pool") {
    try {
      io::kshot_sample(m, 11, 0);
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("a=10, b=10") != std::string::npos);
    }
    CHECK_THROWS_AS(io::kshot_sample(m, 0, 0), ValidationError);
  }
  SUBCASE("selection frequency is uniform") {
    std::map<std::size_t, int> hits;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      for (std::size_t i : io::kshot_sample(m, 2, seed)) ++hits[i];
    }
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
      if (m.entries[i].split != io::Split::kTrainPool) continue;
      const double freq = hits[i] / 1000.0;
      CAPTURE(i);
      CHECK(std::abs(freq - 0.2) <= 0.05);
    }
  }
}
