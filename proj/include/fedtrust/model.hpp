#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedtrust/dataset.hpp"
#include "fedtrust/matrix.hpp"
#include "fedtrust/rng.hpp"

namespace fedtrust {

struct empty_shard : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct empty_accepted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Multinomial logistic-regression parameters; also used as the additive
// increment ("delta") a worker uploads.
struct ModelState {
  Matrix weights;             // n_classes x n_features
  std::vector<double> bias;   // n_classes

  ModelState() = default;
  ModelState(int n_classes, size_t n_features)
      : weights(static_cast<size_t>(n_classes), n_features),
        bias(static_cast<size_t>(n_classes), 0.0) {}

  int n_classes() const { return static_cast<int>(weights.rows); }
  size_t n_features() const { return weights.cols; }

  bool same_shape(const ModelState& other) const {
    return weights.same_shape(other.weights) && bias.size() == other.bias.size();
  }

  bool finite() const { return weights.finite() && all_finite(bias); }

  ModelState& operator+=(const ModelState& other) {
    weights += other.weights;
    for (size_t i = 0; i < bias.size(); ++i) bias[i] += other.bias[i];
    return *this;
  }

  ModelState& operator-=(const ModelState& other) {
    weights -= other.weights;
    for (size_t i = 0; i < bias.size(); ++i) bias[i] -= other.bias[i];
    return *this;
  }

  ModelState& scale(double s) {
    weights.scale(s);
    for (auto& b : bias) b *= s;
    return *this;
  }
};

// Random initial parameters from a symmetric uniform range, the task
// publisher's per-task starting model.
inline ModelState init_model(int n_classes, size_t n_features, double init_range, uint64_t seed) {
  ModelState m(n_classes, n_features);
  Rng rng(derive_seed(seed, "model-init"));
  for (auto& v : m.weights.data) v = rng.uniform(-init_range, init_range);
  for (auto& v : m.bias) v = rng.uniform(-init_range, init_range);
  return m;
}

inline void softmax_logits(const ModelState& m, const double* x, std::vector<double>& probs) {
  const int k = m.n_classes();
  probs.resize(static_cast<size_t>(k));
  double max_logit = -1e300;
  for (int c = 0; c < k; ++c) {
    const double* wr = m.weights.row(static_cast<size_t>(c));
    double z = m.bias[static_cast<size_t>(c)];
    for (size_t j = 0; j < m.n_features(); ++j) z += wr[j] * x[j];
    probs[static_cast<size_t>(c)] = z;
    max_logit = std::max(max_logit, z);
  }
  double sum = 0.0;
  for (auto& p : probs) {
    p = std::exp(p - max_logit);
    sum += p;
  }
  for (auto& p : probs) p /= sum;
}

// Mean softmax cross-entropy over the given examples.
inline double softmax_xe_loss(const ModelState& m, const Dataset& ds,
                              const std::vector<size_t>& batch) {
  if (batch.empty()) throw empty_shard("loss over empty batch");
  std::vector<double> probs;
  double loss = 0.0;
  for (size_t i : batch) {
    softmax_logits(m, ds.features.row(i), probs);
    loss -= std::log(std::max(probs[static_cast<size_t>(ds.labels[i])], 1e-300));
  }
  return loss / static_cast<double>(batch.size());
}

// Analytic gradient of the mean cross-entropy: grad_w = (p - onehot) x^T,
// grad_b = p - onehot, averaged over the batch.
inline ModelState softmax_xe_gradient(const ModelState& m, const Dataset& ds,
                                      const std::vector<size_t>& batch) {
  if (batch.empty()) throw empty_shard("gradient over empty batch");
  ModelState grad(m.n_classes(), m.n_features());
  std::vector<double> probs;
  for (size_t i : batch) {
    softmax_logits(m, ds.features.row(i), probs);
    probs[static_cast<size_t>(ds.labels[i])] -= 1.0;
    const double* x = ds.features.row(i);
    for (int c = 0; c < m.n_classes(); ++c) {
      double* gr = grad.weights.row(static_cast<size_t>(c));
      const double pc = probs[static_cast<size_t>(c)];
      for (size_t j = 0; j < m.n_features(); ++j) gr[j] += pc * x[j];
      grad.bias[static_cast<size_t>(c)] += pc;
    }
  }
  grad.scale(1.0 / static_cast<double>(batch.size()));
  return grad;
}

// One worker's upload: the parameter increment plus the self-reported
// compute time and data size the elapsed-time check audits.
struct LocalUpdate {
  std::string worker_id;
  ModelState delta;
  double claimed_elapsed_ms = 0.0;
  size_t claimed_data_size = 0;
};

struct SgdParams {
  size_t batch_size = 32;
  size_t batches_per_round = 5;
  double learning_rate = 0.1;
  double compute_rate_ms = 1.0;  // simulated milliseconds per example trained
};

// Runs `batches_per_round` SGD steps from the given global model over the
// worker's training pool and returns the parameter delta. The simulated
// clock charges compute_rate_ms per example in the pool actually trained on:
// a lazy worker passes train_fraction < 1, exposes only that prefix of its
// shard to sampling, reports the correspondingly smaller elapsed time, yet
// still claims the full shard size. That mismatch is what the elapsed-time
// check hunts.
inline LocalUpdate local_sgd(const ModelState& global, const Dataset& shard,
                             const SgdParams& params, uint64_t seed,
                             double train_fraction = 1.0,
                             const std::string& worker_id = std::string{}) {
  if (shard.size() == 0) throw empty_shard("local_sgd: empty shard");
  if (params.learning_rate < 0.0) throw std::invalid_argument("negative learning rate");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0))
    throw std::invalid_argument("train_fraction must be in (0,1]");

  const size_t pool =
      std::max<size_t>(1, static_cast<size_t>(std::llround(train_fraction *
                                                           static_cast<double>(shard.size()))));

  Rng rng(derive_seed(seed, "local-sgd"));
  ModelState current = global;
  std::vector<size_t> batch(params.batch_size);
  for (size_t step = 0; step < params.batches_per_round; ++step) {
    for (auto& idx : batch) idx = static_cast<size_t>(rng.bounded(pool));
    ModelState grad = softmax_xe_gradient(current, shard, batch);
    grad.scale(params.learning_rate);
    current -= grad;
  }

  LocalUpdate update;
  update.worker_id = worker_id;
  update.delta = std::move(current);
  update.delta -= global;
  update.claimed_elapsed_ms = params.compute_rate_ms * static_cast<double>(pool);
  update.claimed_data_size = shard.size();
  return update;
}

// New global model = old + mean of accepted deltas. Updates are summed in
// worker-id order so the result is independent of arrival order.
inline ModelState aggregate(const ModelState& global, std::vector<LocalUpdate> accepted) {
  if (accepted.empty()) throw empty_accepted("aggregate: no accepted updates");
  std::sort(accepted.begin(), accepted.end(),
            [](const LocalUpdate& a, const LocalUpdate& b) { return a.worker_id < b.worker_id; });
  ModelState sum(global.n_classes(), global.n_features());
  for (const auto& u : accepted) {
    if (!u.delta.same_shape(global))
      throw std::invalid_argument("aggregate: delta shape mismatch for " + u.worker_id);
    sum += u.delta;
  }
  sum.scale(1.0 / static_cast<double>(accepted.size()));
  ModelState out = global;
  out += sum;
  if (!out.finite()) throw std::runtime_error("aggregate: non-finite model parameters");
  return out;
}

// Fraction of argmax-correct predictions; logit ties resolve to the lowest
// class index so evaluation is deterministic.
inline double evaluate(const ModelState& m, const Dataset& test) {
  if (test.size() == 0) throw empty_shard("evaluate: empty test set");
  size_t correct = 0;
  const int k = m.n_classes();
  for (size_t i = 0; i < test.size(); ++i) {
    const double* x = test.features.row(i);
    int best = 0;
    double best_z = -1e300;
    for (int c = 0; c < k; ++c) {
      const double* wr = m.weights.row(static_cast<size_t>(c));
      double z = m.bias[static_cast<size_t>(c)];
      for (size_t j = 0; j < m.n_features(); ++j) z += wr[j] * x[j];
      if (z > best_z) {
        best_z = z;
        best = c;
      }
    }
    if (best == test.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace fedtrust
