#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "fedtrust/dataset.hpp"
#include "fedtrust/rng.hpp"

namespace fedtrust {

struct insufficient_data : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Worker behavior types. Poisoners flip a fraction of their labels,
// unreliable workers hold data from only a few classes, lazy workers train on
// a fraction of their shard while claiming the full size.
struct Honest {};

struct Poisoner {
  double attack_strength = 0.9;  // fraction of labels remapped
};

struct Unreliable {
  int classes_held = 2;
};

struct Lazy {
  double fraction_trained = 0.5;  // in (0,1)
};

using Behavior = std::variant<Honest, Poisoner, Unreliable, Lazy>;

struct WorkerProfile {
  std::string worker_id;
  Behavior behavior;
  Dataset shard;

  bool is_poisoner() const { return std::holds_alternative<Poisoner>(behavior); }
  bool is_unreliable() const { return std::holds_alternative<Unreliable>(behavior); }
  bool is_lazy() const { return std::holds_alternative<Lazy>(behavior); }

  double attack_strength() const {
    if (auto* p = std::get_if<Poisoner>(&behavior)) return p->attack_strength;
    return 0.0;
  }

  double train_fraction() const {
    if (auto* l = std::get_if<Lazy>(&behavior)) return l->fraction_trained;
    return 1.0;
  }

  void validate(int n_classes) const {
    if (auto* p = std::get_if<Poisoner>(&behavior)) {
      if (p->attack_strength < 0.0 || p->attack_strength > 1.0)
        throw std::invalid_argument(worker_id + ": attack_strength must be in [0,1]");
    }
    if (auto* u = std::get_if<Unreliable>(&behavior)) {
      if (u->classes_held < 1 || u->classes_held > n_classes)
        throw std::invalid_argument(worker_id + ": classes_held must be in [1, n_classes]");
    }
    if (auto* l = std::get_if<Lazy>(&behavior)) {
      if (!(l->fraction_trained > 0.0 && l->fraction_trained < 1.0))
        throw std::invalid_argument(worker_id + ": fraction_trained must be in (0,1)");
    }
  }
};

// Splits a dataset into per-worker shards of equal size (within one example).
// Honest, poisoner and lazy workers draw uniformly across classes from
// disjoint per-class pools; each Unreliable(k) worker draws multinomially
// from k randomly chosen classes. Unreliable draws come from the full class
// pools independently, so unreliable shards may overlap with others —
// disjoint sampling is impossible once a few skewed workers each need half a
// class pool.
inline void partition(const Dataset& ds, std::vector<WorkerProfile>& profiles, uint64_t seed) {
  if (profiles.empty()) throw std::invalid_argument("partition: no worker profiles");
  const size_t n_workers = profiles.size();
  const int n_classes = ds.n_classes;
  for (const auto& p : profiles) p.validate(n_classes);

  const size_t base = ds.size() / n_workers;
  const size_t extra = ds.size() % n_workers;
  if (base == 0) throw insufficient_data("partition: fewer examples than workers");

  Rng rng(derive_seed(seed, "partition"));

  // per-class pools in shuffled order
  std::vector<std::vector<size_t>> pools(static_cast<size_t>(n_classes));
  for (size_t i = 0; i < ds.size(); ++i) pools[static_cast<size_t>(ds.labels[i])].push_back(i);
  for (auto& pool : pools) rng.shuffle(pool);

  // class-balanced stream for the uniform shards: one example per class per
  // cycle, class order reshuffled each cycle, until pools drain
  std::vector<size_t> stream;
  stream.reserve(ds.size());
  {
    std::vector<size_t> taken(static_cast<size_t>(n_classes), 0);
    std::vector<int> order(static_cast<size_t>(n_classes));
    std::iota(order.begin(), order.end(), 0);
    bool any = true;
    while (any) {
      any = false;
      rng.shuffle(order);
      for (int c : order) {
        auto& pool = pools[static_cast<size_t>(c)];
        auto& cur = taken[static_cast<size_t>(c)];
        if (cur < pool.size()) {
          stream.push_back(pool[cur++]);
          any = true;
        }
      }
    }
  }
  size_t stream_cursor = 0;

  for (size_t w = 0; w < n_workers; ++w) {
    auto& profile = profiles[w];
    const size_t shard_size = base + (w < extra ? 1 : 0);
    std::vector<size_t> chosen;
    chosen.reserve(shard_size);

    if (auto* u = std::get_if<Unreliable>(&profile.behavior)) {
      // pick k distinct classes, then draw each example's class uniformly
      std::vector<int> classes(static_cast<size_t>(n_classes));
      std::iota(classes.begin(), classes.end(), 0);
      rng.shuffle(classes);
      classes.resize(static_cast<size_t>(u->classes_held));

      std::vector<size_t> taken(static_cast<size_t>(n_classes), 0);
      for (size_t i = 0; i < shard_size; ++i) {
        int c = classes[rng.bounded(classes.size())];
        auto& pool = pools[static_cast<size_t>(c)];
        if (taken[static_cast<size_t>(c)] >= pool.size())
          throw insufficient_data("partition: class " + std::to_string(c) +
                                  " exhausted for " + profile.worker_id);
        chosen.push_back(pool[taken[static_cast<size_t>(c)]++]);
      }
    } else {
      if (stream_cursor + shard_size > stream.size())
        throw insufficient_data("partition: dataset exhausted for " + profile.worker_id);
      for (size_t i = 0; i < shard_size; ++i) chosen.push_back(stream[stream_cursor++]);
    }

    rng.shuffle(chosen);
    profile.shard = ds.select(chosen);
  }
}

}  // namespace fedtrust
