#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedtrust/log.hpp"
#include "fedtrust/orchestrator.hpp"
#include "fedtrust/scenario.hpp"

namespace fedtrust {

// Experiment harness: seeded multi-run drivers for the accuracy grid, the
// reputation trace, and the threshold sweep, all emitting one CSV schema.
// Every driver is a pure function of (config, seed list), so reruns are
// byte-identical.

// ---------------------------------------------------------------------------
// CSV emission

struct MetricRow {
  std::string experiment;
  std::string stat = "raw";    // raw | mean | std
  std::string status = "ok";   // ok | no_eligible
  std::optional<uint64_t> seed;
  std::string scheme;
  std::optional<double> threshold;
  std::optional<double> emd_setting;
  std::optional<double> attack_strength;
  std::optional<int> attacker_count;
  uint64_t round = 0;
  std::optional<double> accuracy;
  std::map<std::string, double> reputations;

  void validate() const {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (accuracy && !in_unit(*accuracy)) throw std::logic_error("accuracy outside [0,1]");
    if (threshold && !in_unit(*threshold)) throw std::logic_error("threshold outside [0,1]");
    if (attack_strength && !in_unit(*attack_strength))
      throw std::logic_error("attack_strength outside [0,1]");
    if (emd_setting && (*emd_setting < 0.0 || *emd_setting > 2.0))
      throw std::logic_error("emd_setting outside [0,2]");
    if (stat != "raw" && stat != "mean" && stat != "std") throw std::logic_error("bad stat");
    if (status != "ok" && status != "no_eligible") throw std::logic_error("bad status");
    for (const auto& [id, v] : reputations)
      if (!in_unit(v)) throw std::logic_error("reputation outside [0,1] for " + id);
  }
};

class CsvWriter {
 public:
  // worker_ids fix the per-worker reputation columns for this run
  CsvWriter(std::vector<std::string> worker_ids) : worker_ids_(std::move(worker_ids)) {
    out_ << "schema,experiment,stat,status,seed,scheme,threshold,emd_setting,"
            "attack_strength,attacker_count,round,accuracy";
    for (const auto& id : worker_ids_) out_ << ",rep_" << id;
    out_ << '\n';
  }

  void add(const MetricRow& row) {
    row.validate();
    out_ << "fedtrust.v1";
    out_ << ',' << row.experiment;
    out_ << ',' << row.stat;
    out_ << ',' << row.status;
    out_ << ',';
    if (row.seed) out_ << *row.seed;
    out_ << ',' << row.scheme;
    emit_real(row.threshold);
    emit_real(row.emd_setting);
    emit_real(row.attack_strength);
    out_ << ',';
    if (row.attacker_count) out_ << *row.attacker_count;
    out_ << ',' << row.round;
    emit_real(row.accuracy);
    for (const auto& id : worker_ids_) {
      auto it = row.reputations.find(id);
      emit_real(it == row.reputations.end() ? std::optional<double>{}
                                            : std::optional<double>{it->second});
    }
    out_ << '\n';
  }

  std::string str() const { return out_.str(); }

  void write_file(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::ios_base::failure("cannot open output file: " + path);
    f << out_.str();
    if (!f) throw std::ios_base::failure("failed writing output file: " + path);
  }

 private:
  void emit_real(const std::optional<double>& v) {
    out_ << ',';
    if (v) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6f", *v);
      out_ << buf;
    }
  }

  std::vector<std::string> worker_ids_;
  std::ostringstream out_;
};

// mean/std aggregate rows from a cell's raw rows
inline void add_aggregates(CsvWriter& csv, MetricRow proto, const std::vector<double>& values,
                           bool all_ok) {
  if (values.empty()) return;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());

  proto.seed.reset();
  proto.reputations.clear();
  proto.status = all_ok ? "ok" : "no_eligible";
  proto.stat = "mean";
  proto.accuracy = mean;
  csv.add(proto);
  proto.stat = "std";
  proto.accuracy = std::sqrt(var);
  csv.add(proto);
}

// ---------------------------------------------------------------------------
// simulation cell construction

inline std::string worker_name(size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "w%02u", static_cast<unsigned>(i));
  return buf;
}

inline std::string publisher_name(size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "pub%02u", static_cast<unsigned>(i));
  return buf;
}

// Roster layout is positional and stable: poisoners first, then unreliable,
// then lazy, then honest. The reputation trace tracks w00.
inline std::vector<WorkerProfile> build_roster(const RosterSpec& roster) {
  std::vector<WorkerProfile> profiles;
  size_t i = 0;
  for (size_t k = 0; k < roster.poisoners; ++k)
    profiles.push_back({worker_name(i++), Poisoner{roster.attack_strength}, {}});
  for (size_t k = 0; k < roster.unreliable; ++k)
    profiles.push_back({worker_name(i++), Unreliable{roster.classes_held}, {}});
  for (size_t k = 0; k < roster.lazy; ++k)
    profiles.push_back({worker_name(i++), Lazy{roster.lazy_fraction}, {}});
  for (size_t k = 0; k < roster.honest; ++k)
    profiles.push_back({worker_name(i++), Honest{}, {}});
  return profiles;
}

inline std::vector<std::string> roster_worker_ids(const RosterSpec& roster) {
  std::vector<std::string> ids;
  for (size_t i = 0; i < roster.total(); ++i) ids.push_back(worker_name(i));
  return ids;
}

// One self-contained simulation universe: datasets, shards, ledger, state.
struct SimCell {
  Dataset validation;
  Dataset test;
  std::vector<WorkerProfile> profiles;
  ReputationLedger ledger;
  SchemeState state;
  MinerSet miners;

  SimCell(const ScenarioConfig& config, const RosterSpec& roster, uint64_t seed) {
    Dataset train_pool;
    if (config.dataset.kind == DatasetSpec::Kind::Idx) {
      train_pool = load_idx(config.dataset.train_images, config.dataset.train_labels);
      test = load_idx(config.dataset.test_images, config.dataset.test_labels);
    } else {
      const size_t total = config.dataset.train_examples + config.dataset.test_examples;
      Dataset full = gen_synthetic(total, config.dataset.classes, config.dataset.features,
                                   config.dataset.separation, derive_seed(seed, "dataset"));
      train_pool = full.slice(0, config.dataset.train_examples);
      test = full.slice(config.dataset.train_examples, config.dataset.test_examples);
    }

    const size_t val_size = std::max<size_t>(
        1, static_cast<size_t>(std::llround(config.validation_fraction *
                                            static_cast<double>(train_pool.size()))));
    validation = train_pool.slice(0, val_size);
    Dataset worker_pool = train_pool.slice(val_size, train_pool.size() - val_size);

    profiles = build_roster(roster);
    partition(worker_pool, profiles, derive_seed(seed, "shards"));

    miners = MinerSet::make(config.miners, config.faulty_miners);
    for (size_t p = 0; p < config.publishers; ++p) ledger.register_publisher(publisher_name(p));
  }
};

// Week-structured publisher schedule: each simulated week every publisher
// draws a task count uniformly from [min, max]; the week's tasks interleave
// in shuffled order. Drives the familiarity (frequency) differences between
// publishers.
inline std::vector<std::string> publisher_schedule(size_t n_tasks, size_t n_publishers,
                                                   size_t per_week_min, size_t per_week_max,
                                                   uint64_t seed) {
  std::vector<std::string> schedule;
  Rng rng(derive_seed(seed, "schedule"));
  while (schedule.size() < n_tasks) {
    std::vector<std::string> week;
    for (size_t p = 0; p < n_publishers; ++p) {
      size_t count = static_cast<size_t>(
          rng.range(static_cast<int64_t>(per_week_min), static_cast<int64_t>(per_week_max)));
      week.insert(week.end(), count, publisher_name(p));
    }
    rng.shuffle(week);
    schedule.insert(schedule.end(), week.begin(), week.end());
  }
  schedule.resize(n_tasks);
  return schedule;
}

// ---------------------------------------------------------------------------
// accuracy grid: attack strength x data skew x attacker count, defenses off

inline std::string run_accuracy_grid(const ScenarioConfig& config) {
  CsvWriter csv(roster_worker_ids(config.roster));
  RunParams params = config.run_params();

  for (double strength : config.sweep_attack_strengths) {
    for (int classes_held : config.sweep_emd_classes_held) {
      for (int attackers : config.sweep_attacker_counts) {
        const double emd_setting =
            2.0 * (1.0 - static_cast<double>(classes_held) /
                             static_cast<double>(config.dataset.classes));
        RosterSpec roster = config.roster;
        roster.poisoners = static_cast<size_t>(attackers);
        roster.attack_strength = strength;
        roster.classes_held = classes_held;
        roster.honest = config.roster.total() - roster.poisoners - roster.unreliable - roster.lazy;

        MetricRow proto;
        proto.experiment = "accuracy_grid";
        proto.scheme = scheme_name(Scheme::NoDefense);
        proto.emd_setting = emd_setting;
        proto.attack_strength = strength;
        proto.attacker_count = attackers;
        proto.round = config.rounds;

        std::vector<double> cell_accuracies;
        for (uint64_t seed : config.seeds) {
          SimCell cell(config, roster, seed);
          TaskSpec spec;
          spec.task_id = "grid";
          spec.publisher_id = publisher_name(0);
          spec.rounds = config.rounds;
          spec.scheme = Scheme::NoDefense;
          auto report = run_task(spec, cell.profiles, cell.ledger, cell.state, params,
                                 cell.validation, cell.test, cell.miners, 0,
                                 derive_seed(seed, "grid-task"));
          MetricRow row = proto;
          row.seed = seed;
          row.accuracy = report.final_accuracy;
          csv.add(row);
          cell_accuracies.push_back(report.final_accuracy);
        }
        add_aggregates(csv, proto, cell_accuracies, true);
        log_info("accuracy_grid cell strength=%.2f emd=%.2f attackers=%d done", strength,
                 emd_setting, attackers);
      }
    }
  }
  return csv.str();
}

// ---------------------------------------------------------------------------
// reputation trace: 6 good tasks, then misbehavior with a fixed probability

struct TraceResult {
  // per scheme, per task: reputation of the tracked worker seen by that
  // task's publisher just before the task runs
  std::map<std::string, std::vector<double>> traces;
  std::string csv;
};

inline TraceResult run_reputation_trace(const ScenarioConfig& config) {
  CsvWriter csv(roster_worker_ids(config.roster));
  TraceResult result;
  const std::string tracked = worker_name(0);
  const Scheme schemes[] = {Scheme::MSL, Scheme::TSL, Scheme::ATV, Scheme::NoDefense};

  // the tracked worker starts honest; the rest of the roster is honest too
  RosterSpec roster;
  roster.honest = config.roster.total();
  roster.poisoners = 0;
  roster.unreliable = 0;
  roster.lazy = 0;

  for (uint64_t seed : config.seeds) {
    // misbehavior pattern is scheme-independent so traces are comparable
    std::vector<bool> misbehaves(config.tasks, false);
    for (size_t t = config.good_tasks; t < config.tasks; ++t) {
      Rng draw(derive_seed(seed, "misbehave", t));
      misbehaves[t] = draw.uniform() < config.misbehave_probability;
    }
    auto schedule = publisher_schedule(config.tasks, config.publishers,
                                       config.tasks_per_week_min, config.tasks_per_week_max, seed);

    for (Scheme scheme : schemes) {
      SimCell cell(config, roster, seed);
      RunParams params = config.run_params();
      auto& trace = result.traces[std::string(scheme_name(scheme)) + "/" + std::to_string(seed)];

      for (size_t t = 0; t < config.tasks; ++t) {
        const std::string& publisher = schedule[t];

        MetricRow row;
        row.experiment = "reputation_trace";
        row.seed = seed;
        row.scheme = scheme_name(scheme);
        row.attack_strength = config.roster.attack_strength;
        row.round = t;
        for (const auto& p : cell.profiles) {
          row.reputations[p.worker_id] =
              score_worker(scheme, cell.ledger, publisher, p.worker_id, cell.state, params, t)
                  .value;
        }
        trace.push_back(row.reputations[tracked]);

        cell.profiles[0].behavior =
            misbehaves[t] ? Behavior{Poisoner{config.roster.attack_strength}} : Behavior{Honest{}};

        TaskSpec spec;
        spec.task_id = "trace-" + std::to_string(t);
        spec.publisher_id = publisher;
        spec.reputation_threshold = config.threshold;
        spec.rounds = config.rounds;
        spec.scheme = scheme;
        auto report = run_task(spec, cell.profiles, cell.ledger, cell.state, params,
                               cell.validation, cell.test, cell.miners, t,
                               derive_seed(seed, "trace-task", t));
        row.accuracy = report.final_accuracy;
        csv.add(row);
      }
      log_info("reputation_trace seed=%llu scheme=%s done",
               static_cast<unsigned long long>(seed), scheme_name(scheme));
    }
  }
  result.csv = csv.str();
  return result;
}

// ---------------------------------------------------------------------------
// threshold sweep: warmed-up ledger, then one measurement task per threshold
// with selection as the only active defense

struct SweepCellResult {
  std::string scheme;
  double threshold = 0.0;
  uint64_t seed = 0;
  bool eligible = false;
  double accuracy = 0.0;
};

struct SweepResult {
  std::vector<SweepCellResult> cells;
  std::string csv;
};

inline SweepResult run_threshold_sweep(const ScenarioConfig& config) {
  CsvWriter csv(roster_worker_ids(config.roster));
  SweepResult result;
  const Scheme schemes[] = {Scheme::MSL, Scheme::TSL, Scheme::ATV};
  RunParams params = config.run_params();

  // (scheme, threshold) -> per-seed outcome, filled scheme-major so each
  // warm-up runs once per (scheme, seed) and thresholds probe clones of it
  std::map<std::pair<std::string, double>, std::vector<SweepCellResult>> cells;

  for (Scheme scheme : schemes) {
    for (uint64_t seed : config.seeds) {
      // warm up with detection on and no selection filter, so every worker
      // accrues history under this scheme
      SimCell warmed(config, config.roster, seed);
      auto schedule =
          publisher_schedule(config.warmup_tasks, config.publishers, config.tasks_per_week_min,
                             config.tasks_per_week_max, seed);
      for (size_t t = 0; t < config.warmup_tasks; ++t) {
        TaskSpec warm;
        warm.task_id = "warmup-" + std::to_string(t);
        warm.publisher_id = schedule[t];
        warm.reputation_threshold = 0.0;
        warm.rounds = config.rounds;
        warm.scheme = scheme;
        run_task(warm, warmed.profiles, warmed.ledger, warmed.state, params, warmed.validation,
                 warmed.test, warmed.miners, t, derive_seed(seed, "warmup-task", t));
      }

      // measurement: selection by threshold only; the per-round detectors
      // are off so the threshold's effect is what gets measured. Each
      // threshold probes its own clone of the warmed state.
      RunParams measure_params = params;
      measure_params.detectors_enabled = false;
      for (double threshold : config.sweep_thresholds) {
        SimCell cell = warmed;
        TaskSpec measure;
        measure.task_id = "measure";
        measure.publisher_id = publisher_name(0);
        measure.reputation_threshold = threshold;
        measure.rounds = config.rounds;
        measure.scheme = scheme;

        SweepCellResult cell_result{scheme_name(scheme), threshold, seed, false, 0.0};
        try {
          auto report = run_task(measure, cell.profiles, cell.ledger, cell.state, measure_params,
                                 cell.validation, cell.test, cell.miners, config.warmup_tasks,
                                 derive_seed(seed, "measure-task"));
          cell_result.eligible = true;
          cell_result.accuracy = report.final_accuracy;
        } catch (const no_eligible_workers&) {
        }
        cells[{scheme_name(scheme), threshold}].push_back(cell_result);
      }
      log_info("threshold_sweep scheme=%s seed=%llu done", scheme_name(scheme),
               static_cast<unsigned long long>(seed));
    }
  }

  // emit scheme-major, threshold-minor, seeds in listed order
  for (Scheme scheme : schemes) {
    for (double threshold : config.sweep_thresholds) {
      MetricRow proto;
      proto.experiment = "threshold_sweep";
      proto.scheme = scheme_name(scheme);
      proto.threshold = threshold;
      proto.attack_strength = config.roster.attack_strength;
      proto.attacker_count = static_cast<int>(config.roster.poisoners);
      proto.emd_setting = 2.0 * (1.0 - static_cast<double>(config.roster.classes_held) /
                                           static_cast<double>(config.dataset.classes));
      proto.round = config.warmup_tasks;

      std::vector<double> accuracies;
      bool all_ok = true;
      for (const auto& cell_result : cells[{scheme_name(scheme), threshold}]) {
        MetricRow row = proto;
        row.seed = cell_result.seed;
        if (cell_result.eligible) {
          row.accuracy = cell_result.accuracy;
          accuracies.push_back(cell_result.accuracy);
        } else {
          row.status = "no_eligible";
          all_ok = false;
        }
        csv.add(row);
        result.cells.push_back(cell_result);
      }
      add_aggregates(csv, proto, accuracies, all_ok);
    }
  }
  result.csv = csv.str();
  return result;
}

}  // namespace fedtrust
