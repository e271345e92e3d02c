#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedtrust/defense.hpp"
#include "fedtrust/ledger.hpp"
#include "fedtrust/model.hpp"
#include "fedtrust/opinion.hpp"
#include "fedtrust/worker.hpp"

namespace fedtrust {

// Runs the full per-task protocol: candidate admission, reputation-threshold
// worker selection, federated training with the elapsed-time and
// negative-influence defenses, interaction recording, opinion computation,
// and the ledger update. Also provides the traditional-subjective-logic and
// aggregated-trust-value baseline schemes.

struct no_eligible_workers : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct no_events : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Scheme { MSL, TSL, ATV, NoDefense };

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::MSL: return "MSL";
    case Scheme::TSL: return "TSL";
    case Scheme::ATV: return "ATV";
    case Scheme::NoDefense: return "NoDefense";
  }
  return "?";
}

inline Scheme scheme_from_name(const std::string& name) {
  if (name == "MSL") return Scheme::MSL;
  if (name == "TSL") return Scheme::TSL;
  if (name == "ATV") return Scheme::ATV;
  if (name == "NoDefense") return Scheme::NoDefense;
  throw std::invalid_argument("unknown scheme: " + name);
}

struct TaskSpec {
  std::string task_id;
  std::string publisher_id;
  size_t min_data_size = 0;
  double reputation_threshold = 0.5;
  size_t rounds = 1;
  Scheme scheme = Scheme::MSL;

  void validate() const {
    if (reputation_threshold < 0.0 || reputation_threshold > 1.0)
      throw std::invalid_argument("reputation_threshold must be in [0,1]");
    if (rounds < 1) throw std::invalid_argument("rounds must be at least 1");
  }
};

// Mutable cross-task state one scheme simulation carries: per-(publisher,
// worker) interaction histories and the per-worker aggregated trust value.
struct SchemeState {
  std::map<std::pair<std::string, std::string>, std::vector<InteractionRecord>> histories;
  std::map<std::string, double> atv_trust;

  static constexpr double kInitialTrust = 0.5;

  double atv_trust_of(const std::string& worker) const {
    auto it = atv_trust.find(worker);
    return it == atv_trust.end() ? kInitialTrust : it->second;
  }

  const std::vector<InteractionRecord>& history_of(const std::string& publisher,
                                                   const std::string& worker) const {
    static const std::vector<InteractionRecord> empty;
    auto it = histories.find({publisher, worker});
    return it == histories.end() ? empty : it->second;
  }
};

struct RunParams {
  WeightConfig weights;
  SgdParams sgd;
  double init_range = 0.05;       // |initial parameter| bound
  double roni_epsilon = 0.02;
  double compute_tolerance = 0.1;
  double link_failure_min = 0.0;  // per-record packet-loss sample range
  double link_failure_max = 0.4;
  uint64_t frequency_window = 100;
  double atv_scale = 0.1;         // trust-value step per unit offset
  double atv_weight = 1.0;
  bool detectors_enabled = true;  // elapsed + negative-influence checks
};

inline std::vector<std::string> admit_candidates(const TaskSpec& spec,
                                                 const std::vector<WorkerProfile>& candidates) {
  std::vector<std::string> admitted;
  for (const auto& c : candidates) {
    if (c.shard.size() >= spec.min_data_size) admitted.push_back(c.worker_id);
  }
  std::sort(admitted.begin(), admitted.end());
  return admitted;
}

// Composite reputation: local opinion from the publisher's own history,
// fused with the latest on-chain opinions of other publishers (weighted by
// each recommender's familiarity with the worker), then collapsed to the
// scalar T = b + gamma*u. A worker with no history anywhere lands exactly on
// the 0.5 initial reputation.
inline ReputationScore composite_reputation(const ReputationLedger& ledger,
                                            const std::string& publisher,
                                            const std::string& worker,
                                            std::span<const InteractionRecord> history,
                                            const WeightConfig& cfg, uint64_t now,
                                            uint64_t frequency_window,
                                            bool uniform_recommender_weights = false) {
  const Opinion local = local_opinion(history, now, cfg);

  auto latest = ledger.latest_opinions(worker);
  latest.erase(publisher);

  std::vector<std::pair<Opinion, double>> recommendations;
  recommendations.reserve(latest.size());
  for (const auto& [recommender, entry] : latest) {
    double weight = 1.0;
    if (!uniform_recommender_weights) {
      auto counts = ledger.interaction_counts(recommender, now, frequency_window);
      double with_worker = 0.0, with_others = 0.0;
      size_t other_workers = 0;
      for (const auto& [w, n] : counts) {
        if (w == worker) {
          with_worker = static_cast<double>(n);
        } else {
          with_others += static_cast<double>(n);
          ++other_workers;
        }
      }
      const double mean_others =
          other_workers == 0 ? 0.0 : with_others / static_cast<double>(other_workers);
      weight = frequency_weight(with_worker, mean_others);
    }
    recommendations.emplace_back(entry.first, weight);
  }

  Opinion final = local;
  if (auto fused = fuse_recommended(recommendations)) final = combine_opinions(local, *fused);

  ReputationScore score;
  score.worker_id = worker;
  score.opinion = final;
  score.value = reputation_value(final, cfg.gamma);
  score.computed_at = now;
  return score;
}

// Traditional-subjective-logic baseline: the same pipeline at the degenerate
// weight point (equal effect weights, equal timeliness weights, uniform
// recommender weights).
inline ReputationScore tsl_reputation(const ReputationLedger& ledger, const std::string& publisher,
                                      const std::string& worker,
                                      std::span<const InteractionRecord> history, double gamma,
                                      uint64_t now) {
  return composite_reputation(ledger, publisher, worker, history,
                              WeightConfig::traditional(gamma), now, /*frequency_window=*/1,
                              /*uniform_recommender_weights=*/true);
}

// Workers at or above the threshold, best score first, worker id as the
// deterministic tie-break.
inline std::vector<std::string> select_workers(const TaskSpec& spec,
                                               const std::vector<std::string>& admitted,
                                               const std::map<std::string, ReputationScore>& scores) {
  std::vector<std::pair<double, std::string>> eligible;
  for (const auto& id : admitted) {
    auto it = scores.find(id);
    if (it == scores.end())
      throw std::invalid_argument("select_workers: missing score for " + id);
    if (it->second.value >= spec.reputation_threshold) eligible.emplace_back(it->second.value, id);
  }
  if (eligible.empty())
    throw no_eligible_workers("no worker meets threshold " +
                              std::to_string(spec.reputation_threshold));
  std::sort(eligible.begin(), eligible.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> out;
  out.reserve(eligible.size());
  for (auto& [score, id] : eligible) out.push_back(id);
  return out;
}

// Aggregated-trust-value update: offset = (pos - neg) / (pos + neg), applied
// to the stored trust with the given weight and step scale, clamped to [0,1].
inline double atv_update(SchemeState& state, const std::string& worker, size_t pos_count,
                         size_t neg_count, double weight, double scale = 0.1) {
  if (pos_count + neg_count == 0) throw no_events("atv_update: no interaction events");
  if (!(weight > 0.0 && weight <= 1.0))
    throw std::invalid_argument("atv_update: weight must be in (0,1]");
  const double offset = (static_cast<double>(pos_count) - static_cast<double>(neg_count)) /
                        static_cast<double>(pos_count + neg_count);
  double value = state.atv_trust_of(worker) + weight * offset * scale;
  value = std::clamp(value, 0.0, 1.0);
  state.atv_trust[worker] = value;
  return value;
}

struct RoundOutcome {
  std::vector<std::string> accepted;
  std::vector<std::string> rejected;
};

struct WorkerOutcome {
  size_t positive = 0;
  size_t negative = 0;
  double selection_score = SchemeState::kInitialTrust;
};

struct TaskReport {
  std::string task_id;
  std::string publisher_id;
  Scheme scheme = Scheme::MSL;
  uint64_t task_index = 0;
  double final_accuracy = 0.0;
  bool ledger_committed = false;
  std::vector<std::string> selected;
  std::map<std::string, WorkerOutcome> workers;
  std::vector<RoundOutcome> rounds;

  std::string to_flat() const;
  static TaskReport from_flat(std::istream& in);
};

// Per-scheme selection score before the task runs. ATV and the no-defense
// baseline read the accumulated trust value; the subjective-logic schemes
// recompute from histories and the chain.
inline ReputationScore score_worker(Scheme scheme, const ReputationLedger& ledger,
                                    const std::string& publisher, const std::string& worker,
                                    const SchemeState& state, const RunParams& params,
                                    uint64_t now) {
  switch (scheme) {
    case Scheme::MSL:
      return composite_reputation(ledger, publisher, worker, state.history_of(publisher, worker),
                                  params.weights, now, params.frequency_window);
    case Scheme::TSL:
      return tsl_reputation(ledger, publisher, worker, state.history_of(publisher, worker),
                            params.weights.gamma, now);
    case Scheme::ATV:
    case Scheme::NoDefense: {
      ReputationScore s;
      s.worker_id = worker;
      s.value = state.atv_trust_of(worker);
      s.opinion = Opinion::make_vacuous();
      s.computed_at = now;
      return s;
    }
  }
  throw std::logic_error("unreachable");
}

namespace detail {

inline RoniVerdict roni_decide(double acc_with, double acc_without, double epsilon) {
  return (acc_with - acc_without < -epsilon) ? RoniVerdict::Reject : RoniVerdict::Accept;
}

}  // namespace detail

// One full federated-learning task. Every selected worker trains each round;
// updates pass the elapsed-time check then the negative-influence filter;
// each worker earns one Positive or Negative record per round; accepted
// deltas are averaged into the global model. After the last round the
// publisher writes one signed opinion transaction per selected worker and the
// miners run the commit protocol. A failed commit keeps the task results and
// marks the ledger update failed.
inline TaskReport run_task(const TaskSpec& spec, const std::vector<WorkerProfile>& profiles,
                           ReputationLedger& ledger, SchemeState& state, const RunParams& params,
                           const Dataset& validation, const Dataset& test, const MinerSet& miners,
                           uint64_t task_index, uint64_t seed) {
  spec.validate();
  if (!ledger.verify_chain()) throw invalid_tx("run_task: ledger failed verification");

  const auto admitted = admit_candidates(spec, profiles);

  std::map<std::string, ReputationScore> scores;
  for (const auto& id : admitted)
    scores[id] = score_worker(spec.scheme, ledger, spec.publisher_id, id, state, params, task_index);

  std::vector<std::string> selected =
      spec.scheme == Scheme::NoDefense ? admitted : select_workers(spec, admitted, scores);
  if (selected.empty()) throw no_eligible_workers("no candidates admitted");
  std::vector<std::string> roster = selected;
  std::sort(roster.begin(), roster.end());  // id order: execution-order independence

  std::map<std::string, const WorkerProfile*> by_id;
  for (const auto& p : profiles) by_id[p.worker_id] = &p;

  // per-task working shards; poisoners corrupt their copy for this task
  std::map<std::string, Dataset> shards;
  for (const auto& id : roster) {
    const WorkerProfile& p = *by_id.at(id);
    if (p.is_poisoner() && p.attack_strength() > 0.0) {
      shards[id] = poison(p.shard, p.attack_strength(),
                          derive_seed(seed, "poison-" + id, task_index));
    }
  }
  auto shard_of = [&](const std::string& id) -> const Dataset& {
    auto it = shards.find(id);
    return it == shards.end() ? by_id.at(id)->shard : it->second;
  };

  const bool detectors = params.detectors_enabled && spec.scheme != Scheme::NoDefense;

  TaskReport report;
  report.task_id = spec.task_id;
  report.publisher_id = spec.publisher_id;
  report.scheme = spec.scheme;
  report.task_index = task_index;
  report.selected = selected;
  for (const auto& id : selected) report.workers[id].selection_score = scores[id].value;

  ModelState model = init_model(test.n_classes, test.n_features(), params.init_range,
                                derive_seed(seed, "init", task_index));

  std::map<std::string, std::vector<InteractionRecord>> new_records;

  for (size_t round = 1; round <= spec.rounds; ++round) {
    SgdParams sgd = params.sgd;
    sgd.learning_rate = params.sgd.learning_rate / std::sqrt(static_cast<double>(round));

    std::vector<LocalUpdate> updates;
    updates.reserve(roster.size());
    for (const auto& id : roster) {
      const WorkerProfile& p = *by_id.at(id);
      updates.push_back(local_sgd(model, shard_of(id), sgd,
                                  derive_seed(seed, "sgd-" + id + "-" + std::to_string(round),
                                              task_index),
                                  p.train_fraction(), id));
    }

    RoundOutcome outcome;
    std::vector<LocalUpdate> accepted;
    const double acc_base =
        detectors ? evaluate(model, validation) : 0.0;
    for (auto& update : updates) {
      bool ok = true;
      if (detectors) {
        if (elapsed_check(update, params.sgd.compute_rate_ms, params.compute_tolerance) ==
            ElapsedVerdict::Lazy) {
          ok = false;
        } else {
          ModelState candidate = model;
          candidate += update.delta;
          ok = detail::roni_decide(evaluate(candidate, validation), acc_base,
                                   params.roni_epsilon) == RoniVerdict::Accept;
        }
      }
      const std::string id = update.worker_id;  // by value: the move below guts the update
      Rng link_rng(derive_seed(seed, "link-" + id + "-" + std::to_string(round), task_index));
      InteractionRecord record;
      record.publisher_id = spec.publisher_id;
      record.worker_id = id;
      record.task_index = task_index;
      record.outcome = ok ? Outcome::Positive : Outcome::Negative;
      record.link_failure_prob = link_rng.uniform(params.link_failure_min, params.link_failure_max);
      new_records[id].push_back(record);

      if (ok) {
        outcome.accepted.push_back(id);
        accepted.push_back(std::move(update));
        report.workers[id].positive += 1;
      } else {
        outcome.rejected.push_back(id);
        report.workers[id].negative += 1;
      }
    }
    if (!accepted.empty()) model = aggregate(model, std::move(accepted));
    report.rounds.push_back(std::move(outcome));
  }

  report.final_accuracy = evaluate(model, test);

  // fold this task's records into the publisher's histories and trust values
  for (const auto& id : roster) {
    auto& history = state.histories[{spec.publisher_id, id}];
    history.insert(history.end(), new_records[id].begin(), new_records[id].end());
    atv_update(state, id, report.workers[id].positive, report.workers[id].negative,
               params.atv_weight, params.atv_scale);
  }

  // fresh local opinions per worker, one signed transaction each
  const WeightConfig& opinion_weights =
      spec.scheme == Scheme::TSL ? WeightConfig::traditional(params.weights.gamma)
                                 : params.weights;
  std::vector<OpinionTx> txs;
  txs.reserve(roster.size());
  for (const auto& id : roster) {
    const auto& history = state.history_of(spec.publisher_id, id);
    const auto counts = weighted_counts(history, task_index, opinion_weights);
    TxContent content;
    content.publisher_id = spec.publisher_id;
    content.worker_id = id;
    content.opinion = opinion_from_counts(counts, mean_link_failure(history));
    content.alpha_eff = counts.alpha;
    content.beta_eff = counts.beta;
    content.task_index = task_index;
    txs.push_back(ledger.sign_tx(content));
  }
  const std::string proposer = miners.miners[task_index % miners.size()].id;
  report.ledger_committed = ledger.pbft_commit(txs, miners, proposer).has_value();

  return report;
}

// --- flat record serialization for task reports ---

inline std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out.push_back(';');
    out += ids[i];
  }
  return out;
}

inline std::vector<std::string> split_ids(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ';') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline std::string TaskReport::to_flat() const {
  std::ostringstream out;
  char buf[32];
  out << "task_id=" << task_id << '\n';
  out << "publisher=" << publisher_id << '\n';
  out << "scheme=" << scheme_name(scheme) << '\n';
  out << "task_index=" << task_index << '\n';
  std::snprintf(buf, sizeof(buf), "%.6f", final_accuracy);
  out << "final_accuracy=" << buf << '\n';
  out << "ledger_committed=" << (ledger_committed ? 1 : 0) << '\n';
  out << "selected=" << join_ids(selected) << '\n';
  for (const auto& [id, w] : workers) {
    std::snprintf(buf, sizeof(buf), "%.6f", w.selection_score);
    out << "worker." << id << "=" << w.positive << ';' << w.negative << ';' << buf << '\n';
  }
  for (size_t r = 0; r < rounds.size(); ++r) {
    out << "round." << (r + 1) << ".accepted=" << join_ids(rounds[r].accepted) << '\n';
    out << "round." << (r + 1) << ".rejected=" << join_ids(rounds[r].rejected) << '\n';
  }
  return out.str();
}

inline TaskReport TaskReport::from_flat(std::istream& in) {
  TaskReport report;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("bad report line: " + line);
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    if (key == "task_id") {
      report.task_id = value;
    } else if (key == "publisher") {
      report.publisher_id = value;
    } else if (key == "scheme") {
      report.scheme = scheme_from_name(value);
    } else if (key == "task_index") {
      report.task_index = std::stoull(value);
    } else if (key == "final_accuracy") {
      report.final_accuracy = std::stod(value);
    } else if (key == "ledger_committed") {
      report.ledger_committed = value == "1";
    } else if (key == "selected") {
      report.selected = split_ids(value);
    } else if (key.rfind("worker.", 0) == 0) {
      auto parts = split_ids(value);
      if (parts.size() != 3) throw std::runtime_error("bad worker line: " + line);
      WorkerOutcome w;
      w.positive = std::stoull(parts[0]);
      w.negative = std::stoull(parts[1]);
      w.selection_score = std::stod(parts[2]);
      report.workers[key.substr(7)] = w;
    } else if (key.rfind("round.", 0) == 0) {
      auto dot = key.find('.', 6);
      if (dot == std::string::npos) throw std::runtime_error("bad round line: " + line);
      size_t idx = std::stoull(key.substr(6, dot - 6));
      if (report.rounds.size() < idx) report.rounds.resize(idx);
      auto field = key.substr(dot + 1);
      if (field == "accepted") {
        report.rounds[idx - 1].accepted = split_ids(value);
      } else if (field == "rejected") {
        report.rounds[idx - 1].rejected = split_ids(value);
      } else {
        throw std::runtime_error("bad round field: " + line);
      }
    } else {
      throw std::runtime_error("unknown report key: " + key);
    }
  }
  return report;
}

}  // namespace fedtrust
