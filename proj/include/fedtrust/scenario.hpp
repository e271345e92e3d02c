#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedtrust/opinion.hpp"
#include "fedtrust/orchestrator.hpp"

namespace fedtrust {

// Scenario configuration: a sectioned key = value text format checked
// against the schema below. Every key has a default, so a scenario file only
// states what it changes; validation errors carry file and line.

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DatasetSpec {
  enum class Kind { Synthetic, Idx };
  Kind kind = Kind::Synthetic;
  size_t train_examples = 10000;
  size_t test_examples = 2000;
  int classes = 10;
  size_t features = 20;
  double separation = 3.0;
  std::string train_images, train_labels, test_images, test_labels;
};

struct RosterSpec {
  size_t honest = 4;
  size_t poisoners = 2;
  double attack_strength = 0.9;
  size_t unreliable = 4;
  int classes_held = 2;
  size_t lazy = 0;
  double lazy_fraction = 0.5;

  size_t total() const { return honest + poisoners + unreliable + lazy; }
};

struct ScenarioConfig {
  DatasetSpec dataset;
  RosterSpec roster;
  WeightConfig weights;
  uint64_t frequency_window = 100;

  size_t rounds = 30;
  size_t batch_size = 32;
  size_t batches_per_round = 5;
  double learning_rate = 0.3;
  double init_range = 0.05;
  double validation_fraction = 0.05;

  double roni_epsilon = 0.02;
  double compute_tolerance = 0.1;
  double compute_rate_ms = 1.0;
  double link_failure_min = 0.0;
  double link_failure_max = 0.4;

  size_t miners = 4;
  size_t faulty_miners = 0;

  Scheme scheme = Scheme::MSL;
  double threshold = 0.5;
  size_t min_data_size = 0;

  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  size_t publishers = 3;
  size_t tasks = 30;
  size_t good_tasks = 6;
  double misbehave_probability = 0.8;
  size_t warmup_tasks = 6;
  size_t tasks_per_week_min = 20;
  size_t tasks_per_week_max = 40;
  double atv_scale = 0.1;
  std::string output;

  std::vector<double> sweep_attack_strengths = {0.0, 0.5, 0.9};
  std::vector<int> sweep_emd_classes_held = {10, 2};
  std::vector<int> sweep_attacker_counts = {1, 2};
  std::vector<double> sweep_thresholds = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6};

  RunParams run_params() const {
    RunParams p;
    p.weights = weights;
    p.sgd.batch_size = batch_size;
    p.sgd.batches_per_round = batches_per_round;
    p.sgd.learning_rate = learning_rate;
    p.sgd.compute_rate_ms = compute_rate_ms;
    p.init_range = init_range;
    p.roni_epsilon = roni_epsilon;
    p.compute_tolerance = compute_tolerance;
    p.link_failure_min = link_failure_min;
    p.link_failure_max = link_failure_max;
    p.frequency_window = frequency_window;
    p.atv_scale = atv_scale;
    return p;
  }

  static ScenarioConfig parse_file(const std::string& path);
  static ScenarioConfig parse_string(const std::string& text, const std::string& name = "<config>");
  static std::string schema_text();
};

namespace cfgdetail {

struct Entry {
  std::string value;
  size_t line = 0;
};

using Doc = std::map<std::string, Entry>;  // "section.key" -> entry

inline std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline Doc parse_doc(const std::string& text, const std::string& name) {
  Doc doc;
  std::istringstream in(text);
  std::string line, section;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw config_error(name + ":" + std::to_string(line_no) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw config_error(name + ":" + std::to_string(line_no) + ": empty section name");
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error(name + ":" + std::to_string(line_no) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw config_error(name + ":" + std::to_string(line_no) + ": empty key");
    if (section.empty())
      throw config_error(name + ":" + std::to_string(line_no) + ": key outside any section");
    std::string full = section + "." + key;
    if (doc.count(full))
      throw config_error(name + ":" + std::to_string(line_no) + ": duplicate key '" + full + "'");
    doc[full] = {value, line_no};
  }
  return doc;
}

// One schema row per known key; parse_* helpers give line-precise errors.
class Reader {
 public:
  Reader(Doc doc, std::string name) : doc_(std::move(doc)), name_(std::move(name)) {}

  std::string where(const std::string& key) const {
    auto it = doc_.find(key);
    return name_ + ":" + (it != doc_.end() ? std::to_string(it->second.line) : "0");
  }

  bool has(const std::string& key) const { return doc_.count(key) > 0; }

  void take_string(const std::string& key, std::string& out) {
    auto it = doc_.find(key);
    if (it == doc_.end()) return;
    out = it->second.value;
    seen_.insert(key);
  }

  template <typename T>
  void take_real(const std::string& key, T& out, double lo, double hi) {
    auto it = doc_.find(key);
    if (it == doc_.end()) return;
    double v;
    try {
      size_t pos = 0;
      v = std::stod(it->second.value, &pos);
      if (pos != it->second.value.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      fail(key, "expected a real number, got '" + it->second.value + "'");
    }
    if (v < lo || v > hi)
      fail(key, "value " + it->second.value + " outside [" + std::to_string(lo) + ", " +
                    std::to_string(hi) + "]");
    out = static_cast<T>(v);
    seen_.insert(key);
  }

  template <typename T>
  void take_int(const std::string& key, T& out, int64_t lo, int64_t hi) {
    auto it = doc_.find(key);
    if (it == doc_.end()) return;
    int64_t v;
    try {
      size_t pos = 0;
      v = std::stoll(it->second.value, &pos);
      if (pos != it->second.value.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      fail(key, "expected an integer, got '" + it->second.value + "'");
    }
    if (v < lo || v > hi)
      fail(key, "value " + it->second.value + " outside [" + std::to_string(lo) + ", " +
                    std::to_string(hi) + "]");
    out = static_cast<T>(v);
    seen_.insert(key);
  }

  template <typename T>
  void take_list(const std::string& key, std::vector<T>& out, double lo, double hi) {
    auto it = doc_.find(key);
    if (it == doc_.end()) return;
    std::vector<T> parsed;
    std::string item;
    std::istringstream ss(it->second.value);
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) fail(key, "empty list element");
      double v;
      try {
        size_t pos = 0;
        v = std::stod(item, &pos);
        if (pos != item.size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        fail(key, "expected a number list, got '" + item + "'");
      }
      if (v < lo || v > hi)
        fail(key, "list value " + item + " outside [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
      parsed.push_back(static_cast<T>(v));
    }
    if (parsed.empty()) fail(key, "list must not be empty");
    out = std::move(parsed);
    seen_.insert(key);
  }

  void take_scheme(const std::string& key, Scheme& out) {
    auto it = doc_.find(key);
    if (it == doc_.end()) return;
    try {
      out = scheme_from_name(it->second.value);
    } catch (const std::exception&) {
      fail(key, "expected one of MSL, TSL, ATV, NoDefense; got '" + it->second.value + "'");
    }
    seen_.insert(key);
  }

  void take_kind(const std::string& key, DatasetSpec::Kind& out) {
    auto it = doc_.find(key);
    if (it == doc_.end()) return;
    if (it->second.value == "synthetic") {
      out = DatasetSpec::Kind::Synthetic;
    } else if (it->second.value == "idx") {
      out = DatasetSpec::Kind::Idx;
    } else {
      fail(key, "expected 'synthetic' or 'idx', got '" + it->second.value + "'");
    }
    seen_.insert(key);
  }

  // any key the schema never consumed is a typo worth rejecting
  void reject_unknown() const {
    for (const auto& [key, entry] : doc_) {
      if (!seen_.count(key))
        throw config_error(name_ + ":" + std::to_string(entry.line) + ": unknown key '" + key +
                           "'");
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    throw config_error(where(key) + ": [" + key + "] " + message);
  }

 private:
  Doc doc_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace cfgdetail

inline ScenarioConfig ScenarioConfig::parse_string(const std::string& text,
                                                   const std::string& name) {
  cfgdetail::Reader r(cfgdetail::parse_doc(text, name), name);
  ScenarioConfig c;

  r.take_kind("dataset.kind", c.dataset.kind);
  r.take_int("dataset.train_examples", c.dataset.train_examples, 10, 10000000);
  r.take_int("dataset.test_examples", c.dataset.test_examples, 10, 10000000);
  r.take_int("dataset.classes", c.dataset.classes, 2, 1000);
  r.take_int("dataset.features", c.dataset.features, 1, 100000);
  r.take_real("dataset.separation", c.dataset.separation, 1e-6, 1e6);
  r.take_string("dataset.train_images", c.dataset.train_images);
  r.take_string("dataset.train_labels", c.dataset.train_labels);
  r.take_string("dataset.test_images", c.dataset.test_images);
  r.take_string("dataset.test_labels", c.dataset.test_labels);

  r.take_int("roster.honest", c.roster.honest, 0, 10000);
  r.take_int("roster.poisoners", c.roster.poisoners, 0, 10000);
  r.take_real("roster.attack_strength", c.roster.attack_strength, 0.0, 1.0);
  r.take_int("roster.unreliable", c.roster.unreliable, 0, 10000);
  r.take_int("roster.classes_held", c.roster.classes_held, 1, 1000);
  r.take_int("roster.lazy", c.roster.lazy, 0, 10000);
  r.take_real("roster.lazy_fraction", c.roster.lazy_fraction, 0.001, 0.999);

  r.take_real("weights.gamma", c.weights.gamma, 0.0, 1.0);
  r.take_real("weights.w_recent", c.weights.w_recent, 0.0, 1.0);
  r.take_real("weights.w_past", c.weights.w_past, 0.0, 1.0);
  r.take_real("weights.rho_pos", c.weights.rho_pos, 1e-9, 100.0);
  r.take_real("weights.rho_neg", c.weights.rho_neg, 1e-9, 100.0);
  r.take_int("weights.recency_window", c.weights.recency_window, 1, 1000000);
  r.take_int("weights.frequency_window", c.frequency_window, 1, 100000000);

  r.take_int("training.rounds", c.rounds, 1, 100000);
  r.take_int("training.batch_size", c.batch_size, 1, 100000);
  r.take_int("training.batches_per_round", c.batches_per_round, 1, 100000);
  r.take_real("training.learning_rate", c.learning_rate, 0.0, 100.0);
  r.take_real("training.init_range", c.init_range, 0.0, 10.0);
  r.take_real("training.validation_fraction", c.validation_fraction, 0.0, 0.5);

  r.take_real("defenses.roni_epsilon", c.roni_epsilon, 0.0, 1.0);
  r.take_real("defenses.compute_tolerance", c.compute_tolerance, 0.001, 0.999);
  r.take_real("defenses.compute_rate_ms", c.compute_rate_ms, 1e-9, 1e9);
  r.take_real("defenses.link_failure_min", c.link_failure_min, 0.0, 1.0);
  r.take_real("defenses.link_failure_max", c.link_failure_max, 0.0, 1.0);

  r.take_int("ledger.miners", c.miners, 1, 1000);
  r.take_int("ledger.faulty_miners", c.faulty_miners, 0, 1000);

  r.take_scheme("task.scheme", c.scheme);
  r.take_real("task.threshold", c.threshold, 0.0, 1.0);
  r.take_int("task.min_data_size", c.min_data_size, 0, 100000000);

  r.take_list("experiment.seeds", c.seeds, 0, 1e18);
  r.take_int("experiment.publishers", c.publishers, 1, 1000);
  r.take_int("experiment.tasks", c.tasks, 1, 100000);
  r.take_int("experiment.good_tasks", c.good_tasks, 0, 100000);
  r.take_real("experiment.misbehave_probability", c.misbehave_probability, 0.0, 1.0);
  r.take_int("experiment.warmup_tasks", c.warmup_tasks, 0, 100000);
  r.take_int("experiment.tasks_per_week_min", c.tasks_per_week_min, 1, 100000);
  r.take_int("experiment.tasks_per_week_max", c.tasks_per_week_max, 1, 100000);
  r.take_real("experiment.atv_scale", c.atv_scale, 1e-6, 1.0);
  r.take_string("experiment.output", c.output);

  r.take_list("sweep.attack_strengths", c.sweep_attack_strengths, 0.0, 1.0);
  r.take_list("sweep.emd_classes_held", c.sweep_emd_classes_held, 1, 1000);
  r.take_list("sweep.attacker_counts", c.sweep_attacker_counts, 0, 10000);
  r.take_list("sweep.thresholds", c.sweep_thresholds, 0.0, 1.0);

  r.reject_unknown();

  // cross-field checks
  try {
    c.weights.validate();
  } catch (const std::exception& e) {
    throw config_error(r.where("weights.w_recent") + ": " + e.what());
  }
  if (c.roster.total() < 1) r.fail("roster.honest", "roster must contain at least one worker");
  if (c.roster.classes_held > c.dataset.classes)
    r.fail("roster.classes_held", "cannot exceed dataset classes");
  if (c.link_failure_min > c.link_failure_max)
    r.fail("defenses.link_failure_min", "must not exceed link_failure_max");
  if (c.tasks_per_week_min > c.tasks_per_week_max)
    r.fail("experiment.tasks_per_week_min", "must not exceed tasks_per_week_max");
  if (c.seeds.empty()) r.fail("experiment.seeds", "at least one seed required");
  if (c.dataset.kind == DatasetSpec::Kind::Idx) {
    if (c.dataset.train_images.empty() || c.dataset.train_labels.empty() ||
        c.dataset.test_images.empty() || c.dataset.test_labels.empty())
      r.fail("dataset.kind", "idx datasets need train/test image and label paths");
  }
  for (double s : c.sweep_attack_strengths)
    if (s < 0.0 || s > 1.0) r.fail("sweep.attack_strengths", "strengths must be in [0,1]");
  for (int k : c.sweep_emd_classes_held)
    if (k < 1 || k > c.dataset.classes)
      r.fail("sweep.emd_classes_held", "classes held must be in [1, classes]");
  for (int a : c.sweep_attacker_counts)
    if (a < 0 || static_cast<size_t>(a) > c.roster.total())
      r.fail("sweep.attacker_counts", "attacker count exceeds the roster");

  return c;
}

inline ScenarioConfig ScenarioConfig::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::ios_base::failure("cannot open config file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_string(buf.str(), path);
}

inline std::string ScenarioConfig::schema_text() {
  return R"(# scenario configuration schema (all keys optional; defaults shown)
[dataset]
kind = synthetic                # synthetic | idx
train_examples = 10000          # int in [10, 1e7]
test_examples = 2000            # int in [10, 1e7]
classes = 10                    # int in [2, 1000]
features = 20                   # int in [1, 1e5]
separation = 3.0                # real > 0; class-mean spacing
train_images =                  # idx only: IDX image file path
train_labels =                  # idx only
test_images =                   # idx only
test_labels =                   # idx only

[roster]
honest = 4                      # int >= 0
poisoners = 2                   # int >= 0
attack_strength = 0.9           # real in [0,1]; fraction of labels flipped
unreliable = 4                  # int >= 0
classes_held = 2                # int in [1, classes]; unreliable skew
lazy = 0                        # int >= 0
lazy_fraction = 0.5             # real in (0,1); fraction actually trained

[weights]
gamma = 0.5                     # uncertainty weight in the reputation value
w_recent = 0.8                  # timeliness weights, w_recent + w_past = 1
w_past = 0.2
rho_pos = 0.4                   # effect weights (positive / negative events)
rho_neg = 0.6
recency_window = 3              # task-index span counted as recent
frequency_window = 100          # task-index span for frequency counting

[training]
rounds = 30                     # federated rounds per task
batch_size = 32
batches_per_round = 5
learning_rate = 0.3             # decays as lr / sqrt(round)
init_range = 0.05               # initial parameter range
validation_fraction = 0.05      # publisher-held validation slice

[defenses]
roni_epsilon = 0.02             # tolerated validation-accuracy drop
compute_tolerance = 0.1         # elapsed-time slack in (0,1)
compute_rate_ms = 1.0           # simulated ms per example
link_failure_min = 0.0          # packet-loss sample range
link_failure_max = 0.4

[ledger]
miners = 4                      # int >= 1
faulty_miners = 0               # int >= 0

[task]
scheme = MSL                    # MSL | TSL | ATV | NoDefense
threshold = 0.5                 # selection threshold in [0,1]
min_data_size = 0               # admission floor on shard size

[experiment]
seeds = 1,2,3,4,5               # non-empty integer list
publishers = 3                  # task-publisher pool size
tasks = 30                      # reputation-trace length
good_tasks = 6                  # well-behaved tasks before misbehavior
misbehave_probability = 0.8
warmup_tasks = 6                # threshold-sweep warm-up tasks
tasks_per_week_min = 20         # weekly per-publisher task counts
tasks_per_week_max = 40
atv_scale = 0.1                 # trust-value step per unit offset
output =                        # default CSV path (--out overrides)

[sweep]
attack_strengths = 0,0.5,0.9
emd_classes_held = 10,2         # mapped to 2*(1 - k/classes)
attacker_counts = 1,2
thresholds = 0,0.1,0.2,0.3,0.4,0.5,0.6
)";
}

}  // namespace fedtrust
