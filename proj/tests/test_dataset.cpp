#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "fedtrust/dataset.hpp"
#include "fedtrust/worker.hpp"

using namespace fedtrust;

namespace {

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "fedtrust_dataset_test";
  std::filesystem::create_directories(dir);
  return dir;
}

void write_be32(std::ofstream& f, uint32_t v) {
  uint8_t buf[4] = {static_cast<uint8_t>(v >> 24), static_cast<uint8_t>(v >> 16),
                    static_cast<uint8_t>(v >> 8), static_cast<uint8_t>(v)};
  f.write(reinterpret_cast<char*>(buf), 4);
}

// Tiny IDX fixture: `count` 2x2 images with pixel value tied to the label.
void write_idx_pair(const std::string& images, const std::string& labels, uint32_t img_count,
                    uint32_t label_count, uint32_t img_magic = 0x00000803u,
                    uint32_t label_magic = 0x00000801u, bool truncate_images = false) {
  std::ofstream fi(images, std::ios::binary);
  write_be32(fi, img_magic);
  write_be32(fi, img_count);
  write_be32(fi, 2);
  write_be32(fi, 2);
  uint32_t pixels_to_write = truncate_images && img_count > 0 ? img_count * 4 - 2 : img_count * 4;
  for (uint32_t i = 0; i < pixels_to_write; ++i) {
    uint8_t v = static_cast<uint8_t>((i / 4) % 3 * 100);
    fi.write(reinterpret_cast<char*>(&v), 1);
  }
  fi.close();

  std::ofstream fl(labels, std::ios::binary);
  write_be32(fl, label_magic);
  write_be32(fl, label_count);
  for (uint32_t i = 0; i < label_count; ++i) {
    uint8_t v = static_cast<uint8_t>(i % 3);
    fl.write(reinterpret_cast<char*>(&v), 1);
  }
}

// Independent oracle: classify by nearest class mean computed from training data.
double nearest_mean_accuracy(const Dataset& train, const Dataset& test) {
  Matrix means(static_cast<size_t>(train.n_classes), train.n_features());
  std::vector<size_t> counts(static_cast<size_t>(train.n_classes), 0);
  for (size_t i = 0; i < train.size(); ++i) {
    auto c = static_cast<size_t>(train.labels[i]);
    counts[c] += 1;
    for (size_t j = 0; j < train.n_features(); ++j) means(c, j) += train.features(i, j);
  }
  for (size_t c = 0; c < means.rows; ++c)
    for (size_t j = 0; j < means.cols; ++j) means(c, j) /= static_cast<double>(counts[c]);

  size_t correct = 0;
  for (size_t i = 0; i < test.size(); ++i) {
    int best = -1;
    double best_d = 1e300;
    for (int c = 0; c < test.n_classes; ++c) {
      double d = 0.0;
      for (size_t j = 0; j < test.n_features(); ++j) {
        double diff = test.features(i, j) - means(static_cast<size_t>(c), j);
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    if (best == test.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

std::vector<WorkerProfile> paper_roster() {
  std::vector<WorkerProfile> profiles;
  for (int i = 0; i < 2; ++i)
    profiles.push_back({"w0" + std::to_string(i), Poisoner{0.9}, {}});
  for (int i = 2; i < 6; ++i)
    profiles.push_back({"w0" + std::to_string(i), Unreliable{2}, {}});
  for (int i = 6; i < 10; ++i)
    profiles.push_back({"w0" + std::to_string(i), Honest{}, {}});
  return profiles;
}

}  // namespace

TEST_CASE("synthetic generation is deterministic under the seed") {
  auto a = gen_synthetic(500, 10, 20, 8.0, 42);
  auto b = gen_synthetic(500, 10, 20, 8.0, 42);
  CHECK(a.labels == b.labels);
  CHECK(a.features.data == b.features.data);
  auto c = gen_synthetic(500, 10, 20, 8.0, 43);
  CHECK(a.features.data != c.features.data);
}

TEST_CASE("synthetic labels are balanced to within one example") {
  auto ds = gen_synthetic(1003, 10, 20, 8.0, 7);
  std::vector<size_t> counts(10, 0);
  for (int y : ds.labels) counts[static_cast<size_t>(y)] += 1;
  size_t lo = *std::min_element(counts.begin(), counts.end());
  size_t hi = *std::max_element(counts.begin(), counts.end());
  CHECK(hi - lo <= 1);
}

TEST_CASE("ten examples over ten classes give exactly one each") {
  auto ds = gen_synthetic(10, 10, 20, 8.0, 3);
  std::set<int> seen(ds.labels.begin(), ds.labels.end());
  CHECK(seen.size() == 10);
}

TEST_CASE("nearest-mean oracle separates the default synthetic data") {
  auto train = gen_synthetic(2000, 10, 20, 8.0, 11);
  auto test = gen_synthetic(500, 10, 20, 8.0, 12);
  CHECK(nearest_mean_accuracy(train, test) >= 0.95);
}

TEST_CASE("synthetic generation rejects bad dimensions") {
  CHECK_THROWS_AS(gen_synthetic(10, 1, 5, 8.0, 0), invalid_dims);
  CHECK_THROWS_AS(gen_synthetic(10, 3, 5, -1.0, 0), invalid_dims);
  CHECK_THROWS_AS(gen_synthetic(10, 3, 0, 8.0, 0), invalid_dims);
}

TEST_CASE("emd basics") {
  std::vector<double> uniform(10, 0.1);
  CHECK(emd(uniform, uniform) == 0.0);

  std::vector<double> single(10, 0.0);
  single[0] = 1.0;
  CHECK(emd(single, uniform) == doctest::Approx(1.8).epsilon(1e-12));

  std::vector<double> two(10, 0.0);
  two[0] = two[1] = 0.5;
  CHECK(emd(two, uniform) == doctest::Approx(1.6).epsilon(1e-12));

  CHECK_THROWS_AS(emd(uniform, std::vector<double>(5, 0.2)), length_mismatch);
}

TEST_CASE("emd is symmetric, bounded, and zero on identical inputs") {
  Rng rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    size_t k = 2 + rng.bounded(12);
    std::vector<double> p(k), q(k);
    double ps = 0.0, qs = 0.0;
    for (size_t i = 0; i < k; ++i) {
      p[i] = rng.uniform() + 1e-9;
      q[i] = rng.uniform() + 1e-9;
      ps += p[i];
      qs += q[i];
    }
    for (size_t i = 0; i < k; ++i) {
      p[i] /= ps;
      q[i] /= qs;
    }
    // brute-force L1 oracle
    double expect = 0.0;
    for (size_t i = 0; i < k; ++i) expect += std::fabs(p[i] - q[i]);
    double d = emd(p, q);
    CHECK(std::fabs(d - expect) < 1e-12);
    CHECK(d >= 0.0);
    CHECK(d <= 2.0 + 1e-12);
    CHECK(emd(q, p) == doctest::Approx(d).epsilon(1e-15));
    CHECK(emd(p, p) == 0.0);
  }
}

TEST_CASE("partition gives equal shard sizes and the expected skew") {
  auto ds = gen_synthetic(10000, 10, 20, 8.0, 21);
  auto profiles = paper_roster();
  partition(ds, profiles, 99);

  std::vector<double> uniform(10, 0.1);
  for (const auto& p : profiles) {
    CHECK(p.shard.size() == 1000);
    auto dist = label_distribution(p.shard.labels, 10);
    double d = emd(dist, uniform);
    if (p.is_unreliable()) {
      CHECK(d == doctest::Approx(1.6).epsilon(0.05));
    } else {
      CHECK(d <= 0.1);
    }
  }
}

TEST_CASE("partition is deterministic and respects remainders") {
  auto ds = gen_synthetic(1003, 10, 10, 8.0, 5);
  std::vector<WorkerProfile> a, b;
  for (int i = 0; i < 3; ++i) {
    a.push_back({"w" + std::to_string(i), Honest{}, {}});
    b.push_back({"w" + std::to_string(i), Honest{}, {}});
  }
  partition(ds, a, 4);
  partition(ds, b, 4);
  size_t total = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].shard.labels == b[i].shard.labels);
    CHECK(a[i].shard.features.data == b[i].shard.features.data);
    CHECK((a[i].shard.size() == 334 || a[i].shard.size() == 335));
    total += a[i].shard.size();
  }
  CHECK(total == 1003);
}

TEST_CASE("partition fails cleanly when data cannot cover the roster") {
  auto ds = gen_synthetic(100, 10, 5, 8.0, 6);
  std::vector<WorkerProfile> profiles;
  for (int i = 0; i < 2; ++i) profiles.push_back({"w" + std::to_string(i), Unreliable{1}, {}});
  // each unreliable worker needs 50 examples of one class but pools hold 10
  CHECK_THROWS_AS(partition(ds, profiles, 1), insufficient_data);

  std::vector<WorkerProfile> empty;
  CHECK_THROWS_AS(partition(ds, empty, 1), std::invalid_argument);
}

TEST_CASE("poison leaves the shard alone at strength zero") {
  auto ds = gen_synthetic(200, 5, 8, 6.0, 9);
  auto out = poison(ds, 0.0, 77);
  CHECK(out.labels == ds.labels);
  CHECK(out.features.data == ds.features.data);
}

TEST_CASE("poison at full strength changes every label") {
  auto ds = gen_synthetic(200, 5, 8, 6.0, 9);
  auto out = poison(ds, 1.0, 77);
  for (size_t i = 0; i < ds.size(); ++i) {
    CHECK(out.labels[i] != ds.labels[i]);
    CHECK(out.labels[i] >= 0);
    CHECK(out.labels[i] < 5);
  }
  CHECK(out.features.data == ds.features.data);
}

TEST_CASE("poison flips exactly round(strength * n) labels") {
  auto ds = gen_synthetic(1000, 10, 8, 6.0, 13);
  auto out = poison(ds, 0.9, 5);
  size_t changed = 0;
  for (size_t i = 0; i < ds.size(); ++i)
    if (out.labels[i] != ds.labels[i]) ++changed;
  CHECK(changed == 900);

  // exhaustive at small n across strengths
  for (size_t n : {size_t{1}, size_t{2}, size_t{7}, size_t{10}, size_t{33}}) {
    auto small = gen_synthetic(n, 3, 4, 6.0, n);
    for (double s : {0.0, 0.1, 0.25, 0.5, 0.77, 0.9, 1.0}) {
      auto p = poison(small, s, 17);
      size_t flips = 0;
      for (size_t i = 0; i < n; ++i)
        if (p.labels[i] != small.labels[i]) ++flips;
      CHECK(flips == static_cast<size_t>(std::llround(s * static_cast<double>(n))));
    }
  }
}

TEST_CASE("poison is deterministic under the seed") {
  auto ds = gen_synthetic(300, 10, 8, 6.0, 2);
  auto a = poison(ds, 0.5, 123);
  auto b = poison(ds, 0.5, 123);
  CHECK(a.labels == b.labels);
}

TEST_CASE("idx round trip with fixture files") {
  auto dir = temp_dir();
  auto img = (dir / "imgs.idx").string();
  auto lab = (dir / "labels.idx").string();
  write_idx_pair(img, lab, 9, 9);
  auto ds = load_idx(img, lab);
  CHECK(ds.size() == 9);
  CHECK(ds.n_features() == 4);
  CHECK(ds.n_classes == 3);
  for (size_t i = 0; i < ds.size(); ++i) {
    CHECK(ds.labels[i] == static_cast<int>(i % 3));
    for (size_t j = 0; j < 4; ++j) {
      CHECK(ds.features(i, j) >= 0.0);
      CHECK(ds.features(i, j) <= 1.0);
    }
  }
}

TEST_CASE("idx loader rejects bad magic, truncation, count mismatch") {
  auto dir = temp_dir();
  auto img = (dir / "i2.idx").string();
  auto lab = (dir / "l2.idx").string();

  write_idx_pair(img, lab, 5, 5, 0x00000802u);
  CHECK_THROWS_AS(load_idx(img, lab), idx_bad_magic);

  write_idx_pair(img, lab, 5, 5, 0x00000803u, 0x00000802u);
  CHECK_THROWS_AS(load_idx(img, lab), idx_bad_magic);

  write_idx_pair(img, lab, 5, 4);
  CHECK_THROWS_AS(load_idx(img, lab), idx_count_mismatch);

  write_idx_pair(img, lab, 5, 5, 0x00000803u, 0x00000801u, true);
  CHECK_THROWS_AS(load_idx(img, lab), idx_truncated);

  CHECK_THROWS_AS(load_idx((dir / "missing.idx").string(), lab), std::ios_base::failure);
}
