#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedtrust/matrix.hpp"
#include "fedtrust/rng.hpp"

namespace fedtrust {

struct invalid_dims : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct length_mismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct idx_bad_magic : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct idx_truncated : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct idx_count_mismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Dataset {
  Matrix features;                 // n_examples x n_features
  std::vector<int> labels;         // class indices in [0, n_classes)
  int n_classes = 0;

  size_t size() const { return labels.size(); }
  size_t n_features() const { return features.cols; }

  Dataset slice(size_t begin, size_t count) const {
    Dataset out;
    out.n_classes = n_classes;
    out.features = Matrix(count, features.cols);
    out.labels.resize(count);
    for (size_t i = 0; i < count; ++i) {
      out.labels[i] = labels[begin + i];
      for (size_t j = 0; j < features.cols; ++j) out.features(i, j) = features(begin + i, j);
    }
    return out;
  }

  Dataset select(const std::vector<size_t>& idx) const {
    Dataset out;
    out.n_classes = n_classes;
    out.features = Matrix(idx.size(), features.cols);
    out.labels.resize(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) {
      out.labels[i] = labels[idx[i]];
      for (size_t j = 0; j < features.cols; ++j) out.features(i, j) = features(idx[i], j);
    }
    return out;
  }
};

// Empirical label distribution as a probability vector over n_classes.
inline std::vector<double> label_distribution(const std::vector<int>& labels, int n_classes) {
  std::vector<double> dist(static_cast<size_t>(n_classes), 0.0);
  for (int y : labels) dist[static_cast<size_t>(y)] += 1.0;
  if (!labels.empty())
    for (auto& p : dist) p /= static_cast<double>(labels.size());
  return dist;
}

// Data-quality distance between a shard's label distribution and the global
// one: the L1 distance sum |p_i - q_i|, range [0, 2].
inline double emd(const std::vector<double>& shard_dist, const std::vector<double>& global_dist) {
  if (shard_dist.size() != global_dist.size())
    throw length_mismatch("emd: distributions have different lengths");
  double d = 0.0;
  for (size_t i = 0; i < shard_dist.size(); ++i) d += std::fabs(shard_dist[i] - global_dist[i]);
  return d;
}

// Class-conditional Gaussian blobs. Class means sit at `separation` along
// orthogonal feature axes (random unit directions once classes outnumber
// features); labels are balanced to within one example per class. The whole
// dataset is a pure function of the seed.
inline Dataset gen_synthetic(size_t n_examples, int n_classes, size_t n_features,
                             double separation, uint64_t seed) {
  if (n_classes < 2) throw invalid_dims("gen_synthetic: need at least 2 classes");
  if (n_features == 0) throw invalid_dims("gen_synthetic: need at least 1 feature");
  if (separation <= 0.0) throw invalid_dims("gen_synthetic: separation must be positive");

  Rng rng(derive_seed(seed, "synthetic"));

  Matrix means(static_cast<size_t>(n_classes), n_features);
  for (int c = 0; c < n_classes; ++c) {
    if (static_cast<size_t>(c) < n_features) {
      means(c, static_cast<size_t>(c)) = separation;
    } else {
      double norm = 0.0;
      for (size_t j = 0; j < n_features; ++j) {
        double v = rng.normal();
        means(c, j) = v;
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (size_t j = 0; j < n_features; ++j) means(c, j) *= separation / norm;
    }
  }

  // balanced labels: floor(n/k) each, first n%k classes get one extra
  std::vector<int> labels;
  labels.reserve(n_examples);
  size_t base = n_examples / static_cast<size_t>(n_classes);
  size_t extra = n_examples % static_cast<size_t>(n_classes);
  for (int c = 0; c < n_classes; ++c) {
    size_t count = base + (static_cast<size_t>(c) < extra ? 1 : 0);
    labels.insert(labels.end(), count, c);
  }
  rng.shuffle(labels);

  Dataset ds;
  ds.n_classes = n_classes;
  ds.labels = std::move(labels);
  ds.features = Matrix(n_examples, n_features);
  for (size_t i = 0; i < n_examples; ++i) {
    int y = ds.labels[i];
    for (size_t j = 0; j < n_features; ++j)
      ds.features(i, j) = means(static_cast<size_t>(y), j) + rng.normal();
  }
  return ds;
}

namespace detail {

inline uint32_t read_be32(std::istream& in, const std::string& path) {
  uint8_t buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (in.gcount() != 4) throw idx_truncated("truncated IDX header in " + path);
  return (uint32_t{buf[0]} << 24) | (uint32_t{buf[1]} << 16) | (uint32_t{buf[2]} << 8) |
         uint32_t{buf[3]};
}

}  // namespace detail

// IDX image/label pair loader (big-endian; images magic 0x00000803 with dims
// [count, rows, cols] and unsigned-byte pixels; labels magic 0x00000801 with
// [count] unsigned-byte labels). Pixels are scaled to [0, 1].
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::ios_base::failure("cannot open IDX image file: " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::ios_base::failure("cannot open IDX label file: " + labels_path);

  uint32_t img_magic = detail::read_be32(img, images_path);
  if (img_magic != 0x00000803u)
    throw idx_bad_magic("bad IDX image magic in " + images_path);
  uint32_t n_images = detail::read_be32(img, images_path);
  uint32_t rows = detail::read_be32(img, images_path);
  uint32_t cols = detail::read_be32(img, images_path);

  uint32_t lab_magic = detail::read_be32(lab, labels_path);
  if (lab_magic != 0x00000801u)
    throw idx_bad_magic("bad IDX label magic in " + labels_path);
  uint32_t n_labels = detail::read_be32(lab, labels_path);

  if (n_images != n_labels)
    throw idx_count_mismatch("IDX count mismatch: " + std::to_string(n_images) + " images vs " +
                             std::to_string(n_labels) + " labels");

  const size_t pixels = static_cast<size_t>(rows) * cols;
  Dataset ds;
  ds.features = Matrix(n_images, pixels);
  ds.labels.resize(n_images);

  std::vector<uint8_t> buf(pixels);
  for (size_t i = 0; i < n_images; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
    if (static_cast<size_t>(img.gcount()) != pixels)
      throw idx_truncated("truncated IDX image data in " + images_path);
    for (size_t j = 0; j < pixels; ++j) ds.features(i, j) = buf[j] / 255.0;
  }
  int max_label = 0;
  for (size_t i = 0; i < n_labels; ++i) {
    int c = lab.get();
    if (c == std::char_traits<char>::eof())
      throw idx_truncated("truncated IDX label data in " + labels_path);
    ds.labels[i] = c;
    max_label = std::max(max_label, c);
  }
  ds.n_classes = max_label + 1;
  return ds;
}

// Label-flip poisoning: exactly round(strength * n) examples, chosen at
// random, get their label remapped to a uniformly random different class.
inline Dataset poison(const Dataset& shard, double attack_strength, uint64_t seed) {
  if (attack_strength < 0.0 || attack_strength > 1.0)
    throw std::invalid_argument("attack strength must be in [0,1]");
  Dataset out = shard;
  const size_t n = shard.size();
  const size_t n_flip = static_cast<size_t>(std::llround(attack_strength * static_cast<double>(n)));
  if (n_flip == 0) return out;

  Rng rng(derive_seed(seed, "poison"));
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  rng.shuffle(idx);
  for (size_t i = 0; i < n_flip; ++i) {
    int old = out.labels[idx[i]];
    int repl = static_cast<int>(rng.bounded(static_cast<uint64_t>(shard.n_classes - 1)));
    if (repl >= old) ++repl;  // uniform over the other classes
    out.labels[idx[i]] = repl;
  }
  return out;
}

}  // namespace fedtrust
