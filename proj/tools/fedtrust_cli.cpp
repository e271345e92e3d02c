// Command-line experiment harness for the reputation-based federated
// learning simulator. Subcommands mirror the library's experiment drivers;
// all runs are pure functions of (config, seeds), so identical invocations
// produce byte-identical output files.
//
// Exit codes: 0 success, 1 chain verification failure, 2 I/O error,
// 3 configuration error.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "fedtrust/fedtrust.hpp"

namespace {

constexpr int kExitVerifyFailed = 1;
constexpr int kExitIoError = 2;
constexpr int kExitConfigError = 3;

struct CommonOpts {
  std::string config_path;
  std::string out_path;
  std::string seeds_csv;
  std::string scheme;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "scenario config file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", opts.out_path, "output CSV path");
  cmd->add_option("--seeds", opts.seeds_csv, "comma-separated seed list override");
  cmd->add_option("--scheme", opts.scheme, "scheme override (MSL|TSL|ATV|NoDefense)");
}

fedtrust::ScenarioConfig load_config(const CommonOpts& opts) {
  auto config = fedtrust::ScenarioConfig::parse_file(opts.config_path);
  if (!opts.seeds_csv.empty()) {
    std::vector<uint64_t> seeds;
    std::string item;
    std::istringstream ss(opts.seeds_csv);
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) seeds.push_back(std::stoull(item));
    }
    if (seeds.empty()) throw fedtrust::config_error("--seeds: no seeds given");
    config.seeds = std::move(seeds);
  }
  if (!opts.scheme.empty()) config.scheme = fedtrust::scheme_from_name(opts.scheme);
  if (!opts.out_path.empty()) config.output = opts.out_path;
  return config;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::ios_base::failure("cannot open output file: " + path);
  f << text;
  if (!f) throw std::ios_base::failure("failed writing output file: " + path);
}

std::string require_output(const fedtrust::ScenarioConfig& config) {
  if (config.output.empty())
    throw fedtrust::config_error("no output path: pass --out or set [experiment] output");
  return config.output;
}

int cmd_verify(const std::string& chain_path) {
  std::vector<fedtrust::Block> chain;
  try {
    chain = fedtrust::ReputationLedger::parse_file(chain_path);
  } catch (const std::ios_base::failure& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIoError;
  } catch (const fedtrust::chain_format_error& e) {
    std::fprintf(stderr, "verification failed: malformed chain file: %s\n", e.what());
    return kExitVerifyFailed;
  }
  if (auto defect = fedtrust::ReputationLedger::find_chain_defect(chain)) {
    std::fprintf(stderr, "verification failed: %s\n", defect->c_str());
    return kExitVerifyFailed;
  }
  std::printf("chain ok: %zu blocks\n", chain.size());
  return 0;
}

int cmd_run_task(const fedtrust::ScenarioConfig& config, const std::string& report_path,
                 const std::string& chain_path) {
  using namespace fedtrust;
  const uint64_t seed = config.seeds.front();
  SimCell cell(config, config.roster, seed);
  RunParams params = config.run_params();

  TaskSpec spec;
  spec.task_id = "task-0";
  spec.publisher_id = publisher_name(0);
  spec.min_data_size = config.min_data_size;
  spec.reputation_threshold = config.threshold;
  spec.rounds = config.rounds;
  spec.scheme = config.scheme;

  auto report = run_task(spec, cell.profiles, cell.ledger, cell.state, params, cell.validation,
                         cell.test, cell.miners, 0, derive_seed(seed, "cli-task"));
  write_text(report_path, report.to_flat());
  if (!chain_path.empty()) cell.ledger.export_file(chain_path);

  std::printf("task %s: scheme=%s accuracy=%.6f selected=%zu committed=%s\n",
              report.task_id.c_str(), scheme_name(report.scheme), report.final_accuracy,
              report.selected.size(), report.ledger_committed ? "yes" : "no");
  std::printf("report written to %s\n", report_path.c_str());
  if (!chain_path.empty()) std::printf("chain written to %s\n", chain_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reputation-based federated learning simulator"};
  app.require_subcommand(1);

  CommonOpts grid_opts, trace_opts, sweep_opts, task_opts;
  std::string verify_chain_path;
  std::string report_path = "task_report.txt";
  std::string task_chain_path;

  auto* grid = app.add_subcommand(
      "accuracy-grid", "sweep attack strength x data skew x attacker count with defenses off");
  add_common(grid, grid_opts);

  auto* trace = app.add_subcommand(
      "reputation-trace", "track one worker's reputation through good tasks then misbehavior");
  add_common(trace, trace_opts);

  auto* sweep = app.add_subcommand(
      "threshold-sweep", "accuracy of a warmed-up task as the selection threshold rises");
  add_common(sweep, sweep_opts);

  auto* task = app.add_subcommand("run-task", "run a single federated learning task");
  add_common(task, task_opts);
  task->add_option("--report", report_path, "task report output path");
  task->add_option("--chain", task_chain_path, "export the reputation chain to this file");

  auto* verify = app.add_subcommand("verify", "verify an exported reputation chain file");
  verify->add_option("chain_file", verify_chain_path, "chain export to verify")->required();

  auto* schema = app.add_subcommand("schema", "print the scenario config schema");

  CLI11_PARSE(app, argc, argv);

  try {
    if (schema->parsed()) {
      std::printf("%s", fedtrust::ScenarioConfig::schema_text().c_str());
      return 0;
    }
    if (verify->parsed()) return cmd_verify(verify_chain_path);

    if (grid->parsed()) {
      auto config = load_config(grid_opts);
      const std::string out = require_output(config);
      write_text(out, fedtrust::run_accuracy_grid(config));
      std::printf("accuracy grid written to %s\n", out.c_str());
      return 0;
    }
    if (trace->parsed()) {
      auto config = load_config(trace_opts);
      const std::string out = require_output(config);
      write_text(out, fedtrust::run_reputation_trace(config).csv);
      std::printf("reputation trace written to %s\n", out.c_str());
      return 0;
    }
    if (sweep->parsed()) {
      auto config = load_config(sweep_opts);
      const std::string out = require_output(config);
      write_text(out, fedtrust::run_threshold_sweep(config).csv);
      std::printf("threshold sweep written to %s\n", out.c_str());
      return 0;
    }
    if (task->parsed()) {
      return cmd_run_task(load_config(task_opts), report_path, task_chain_path);
    }
  } catch (const fedtrust::config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const std::ios_base::failure& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIoError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfigError;
  }
  return 0;
}
