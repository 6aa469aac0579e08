// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

// Command-line front end for the experiment harness.
//
//   agentcrm run --config PATH [--seed N] --out DIR [--resume STATE] [--stop-after N]
//   agentcrm report --audit DIR
//   agentcrm snapshot --audit DIR --state PATH
//   agentcrm restore --state PATH
//   agentcrm simulate --config PATH [--seed N] --out FILE
//   agentcrm fit-weights --events FILE --goal EVENT [--window-hours H] [--smoothing A]

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "agentcrm/harness.h"
#include "agentcrm/simd/kernels.h"
#include "json.hpp"

namespace {

using namespace agentcrm;
using nlohmann::json;

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            const std::string& out_dir, const std::string& resume_path,
            std::optional<int> stop_after) {
  ExperimentConfig cfg = ExperimentConfig::load(config_path);
  if (seed) cfg.sim.seed = *seed;
  RunOptions options;
  if (!resume_path.empty()) options.resume = load_experiment_state(resume_path);
  options.stop_after = stop_after;

  const ExperimentResult result = run_experiment(cfg, options);
  write_outputs(result, out_dir);
  std::cout << "cycles run: " << result.state.next_cycle << "/" << cfg.n_cycles
            << "  treated: " << result.treated_users.size()
            << "  control: " << result.control_users.size()
            << "  decisions: " << result.decision_log.size()
            << "  estimates: " << result.estimate_log.size()
            << "  kernels: " << simd::isa_name(simd::active_isa()) << "\n";
  if (result.report) std::cout << result.report->to_table();
  std::cout << "outputs written to " << out_dir << "\n";
  return 0;
}

int cmd_report(const std::string& audit_dir) {
  std::ifstream est(audit_dir + "/estimates.jsonl");
  if (!est) throw std::runtime_error("no estimates.jsonl in '" + audit_dir + "'");
  std::size_t n = 0;
  std::size_t successes = 0;
  double sum = 0.0;
  double sum_sq = 0.0;
  std::string line;
  while (std::getline(est, line)) {
    if (line.empty()) continue;
    const json doc = json::parse(line);
    const double d = doc.at("delta_y").get<double>();
    ++n;
    sum += d;
    sum_sq += d * d;
    successes += static_cast<std::size_t>(doc.at("reward_bit").get<int>());
  }
  std::cout << "interventions measured: " << n << "\n";
  if (n > 0) {
    const double mean = sum / static_cast<double>(n);
    const double var = n > 1 ? (sum_sq - static_cast<double>(n) * mean * mean) /
                                   static_cast<double>(n - 1)
                             : 0.0;
    std::cout << std::fixed << std::setprecision(4) << "mean delta_y: " << mean
              << "  (s.e. " << std::sqrt(std::max(var, 0.0) / static_cast<double>(n)) << ")"
              << "  reward rate: " << static_cast<double>(successes) / static_cast<double>(n)
              << "\n";
  }
  std::ifstream rep(audit_dir + "/lift_report.json");
  if (rep) {
    std::cout << LiftReport::from_json(json::parse(rep)).to_table();
  } else {
    std::cout << "no lift report (run did not finish all cycles)\n";
  }
  return 0;
}

int cmd_snapshot(const std::string& audit_dir, const std::string& state_path) {
  const ExperimentState state = load_experiment_state(audit_dir + "/state.json");
  snapshot_state(state.store, state_path);
  std::cout << "wrote " << state.store.size() << " posterior entries (after cycle "
            << state.next_cycle << ") to " << state_path << "\n";
  return 0;
}

int cmd_restore(const std::string& state_path) {
  const PosteriorStore store = restore_state(state_path);
  std::cout << "default prior: Beta(" << store.default_prior().alpha << ", "
            << store.default_prior().beta << ")  entries: " << store.size() << "\n";
  std::cout << std::left << std::setw(16) << "context" << std::setw(14) << "set" << std::setw(14)
            << "label" << std::right << std::setw(10) << "alpha" << std::setw(10) << "beta"
            << std::setw(10) << "mean" << "\n";
  for (const auto& [key, post] : store.entries()) {
    std::cout << std::left << std::setw(16) << key.context << std::setw(14) << key.action_set
              << std::setw(14) << key.label << std::right << std::fixed << std::setprecision(2)
              << std::setw(10) << post.alpha << std::setw(10) << post.beta
              << std::setprecision(4) << std::setw(10) << post.mean() << "\n";
  }
  return 0;
}

int cmd_simulate(const std::string& config_path, std::optional<std::uint64_t> seed,
                 const std::string& out_path) {
  ExperimentConfig cfg = ExperimentConfig::load(config_path);
  if (seed) cfg.sim.seed = *seed;
  SimConfig sim = cfg.sim;
  sim.horizon = static_cast<Duration>(cfg.warmup_days) * kMillisPerDay;
  const auto users = generate_population(sim, cfg.catalog.space());
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
  const Rng root(sim.seed);
  std::size_t n = 0;
  for (std::size_t i = 0; i < users.size(); ++i) {
    const auto s =
        simulate_organic(users[i], sim, Interval(0, sim.horizon), root.split("warmup", i));
    // Spawned goals past the horizon are dropped, as in the harness.
    EventStream kept = s.slice(Interval(0, sim.horizon));
    write_events(out, kept);
    n += kept.size();
  }
  std::cout << "wrote " << n << " events for " << users.size() << " users to " << out_path
            << "\n";
  return 0;
}

int cmd_fit_weights(const std::string& events_path, const std::vector<std::string>& goals,
                    double window_hours, double smoothing) {
  const IngestResult in = ingest_events_file(events_path);
  for (const auto& e : in.report.errors) {
    std::cerr << events_path << ":" << e.line_number << ": " << e.message << "\n";
  }
  std::vector<EventStream> streams;
  for (const auto& [user, stream] : in.streams) streams.push_back(stream);
  GoalSpec goal;
  goal.goal_event_names.insert(goals.begin(), goals.end());
  goal.attribution_window = static_cast<Duration>(std::llround(window_hours * kMillisPerHour));
  std::cout << fit_event_weights(streams, goal, smoothing).to_json().dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Agentic message personalisation: experiment harness and tools"};
  app.require_subcommand(1);

  std::string config_path, out_dir, resume_path, audit_dir, state_path, events_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> stop_after;
  std::vector<std::string> goals;
  double window_hours = 24.0;
  double smoothing = 1.0;

  auto* run = app.add_subcommand("run", "Run a simulated experiment");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--seed", seed, "Override the config's seed");
  run->add_option("--out", out_dir, "Output directory for audit logs and reports")->required();
  run->add_option("--resume", resume_path, "Continue from a saved state.json");
  run->add_option("--stop-after", stop_after, "Stop once this many cycles have run");

  auto* report = app.add_subcommand("report", "Summarise a finished run");
  report->add_option("--audit", audit_dir, "Output directory of a run")->required();

  auto* snapshot = app.add_subcommand("snapshot", "Export a run's posterior store");
  snapshot->add_option("--audit", audit_dir, "Output directory of a run")->required();
  snapshot->add_option("--state", state_path, "Snapshot file to write")->required();

  auto* restore = app.add_subcommand("restore", "Load a posterior snapshot and print it");
  restore->add_option("--state", state_path, "Snapshot file to read")->required();

  auto* simulate = app.add_subcommand("simulate", "Export warm-up events as JSON lines");
  simulate->add_option("--config", config_path, "Experiment config (JSON)")->required();
  simulate->add_option("--seed", seed, "Override the config's seed");
  simulate->add_option("--out", events_path, "Event log to write")->required();

  auto* fit = app.add_subcommand("fit-weights", "Fit event weights from a JSON-lines log");
  fit->add_option("--events", events_path, "Event log")->required();
  fit->add_option("--goal", goals, "Goal event name (repeatable)")->required();
  fit->add_option("--window-hours", window_hours, "Attribution window in hours");
  fit->add_option("--smoothing", smoothing, "Additive smoothing count");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, seed, out_dir, resume_path, stop_after);
    if (*report) return cmd_report(audit_dir);
    if (*snapshot) return cmd_snapshot(audit_dir, state_path);
    if (*restore) return cmd_restore(state_path);
    if (*simulate) return cmd_simulate(config_path, seed, events_path);
    if (*fit) return cmd_fit_weights(events_path, goals, window_hours, smoothing);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
