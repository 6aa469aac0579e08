// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agentcrm/event_model.h"
#include "agentcrm/ite.h"
#include "agentcrm/outcome.h"
#include "agentcrm/policy.h"
#include "agentcrm/simulator.h"
#include "agentcrm/synthesis.h"
#include "json.hpp"

namespace agentcrm {

// What a metric counts per user over the experiment period.
enum class MetricKind {
  kBinary,  // 1 if any of the events occurred
  kCount,   // number of occurrences
  kValue,   // sum of event values (GMV-style)
};

struct MetricSpec {
  std::string name;
  MetricKind kind = MetricKind::kBinary;
  std::set<std::string> events;
};

// How posteriors are keyed.
enum class ContextMode {
  kUser,          // one context per user
  kGlobal,        // a single shared context
  kActivityTier,  // "tier:high" / "tier:low" by warm-up activity
};

struct ExperimentConfig {
  SimConfig sim;
  MessageCatalog catalog;
  DidConfig did;
  int n_cycles = 30;
  double treatment_fraction = 0.5;
  Duration cycle_length = kMillisPerDay;
  // Minimum number of cycles between two sends to the same user.
  int min_cycles_between_sends = 1;
  int warmup_days = 14;
  int profile_window_days = 14;
  double smoothing = 1.0;
  // Neighbours used to impute priors for entries without data; 0 disables.
  int empirical_bayes_k = 10;
  ContextMode context = ContextMode::kUser;
  // Rules-based message applied to everyone at t_int: multiplies lift-event
  // rates in the effect window for treated and control users alike.
  double baseline_multiplier = 1.0;
  std::vector<MetricSpec> metrics;
  double ci_level = 0.99;
  int bootstrap_resamples = 10000;

  std::uint64_t seed() const { return sim.seed; }

  // Reads the documented config schema; `base_dir` resolves a catalogue given
  // as a file path.
  static ExperimentConfig from_json(const nlohmann::json& doc, const std::string& base_dir = ".");
  static ExperimentConfig load(const std::string& path);
  nlohmann::json to_json() const;
};

// Throws std::invalid_argument for inconsistent settings.
void validate(const ExperimentConfig& cfg);

struct MetricLift {
  std::string name;
  MetricKind kind = MetricKind::kBinary;
  double treated_rate = 0.0;
  double control_rate = 0.0;
  double absolute_lift = 0.0;
  // nullopt when the control rate is 0.
  std::optional<double> relative_lift;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::optional<double> relative_ci_low;
  std::optional<double> relative_ci_high;
};

struct LiftReport {
  double ci_level = 0.99;
  int resamples = 0;
  std::size_t pairs = 0;
  std::size_t unmatched = 0;
  std::vector<MetricLift> metrics;

  const MetricLift& metric(const std::string& name) const;
  nlohmann::json to_json() const;
  static LiftReport from_json(const nlohmann::json& doc);
  std::string to_table() const;
};

// Per-user metric values, one per MetricSpec, in spec order.
struct UserOutcome {
  std::string user_id;
  std::vector<double> values;
};

struct LiftOptions {
  double ci_level = 0.99;
  int resamples = 10000;
  std::uint64_t seed = 0;
};

// Pairs every treated user (in user_id order) with its nearest remaining
// control on pre-period profiles, without replacement, then reports the mean
// paired difference per metric with a percentile bootstrap CI over pairs.
// Treated users left without a control are counted in `unmatched`.
// Throws std::invalid_argument if either group is empty.
LiftReport matched_lift(const std::vector<UserOutcome>& treated,
                        const std::vector<UserOutcome>& control,
                        const std::map<std::string, UserProfile>& profiles,
                        const std::vector<MetricSpec>& metrics, const LiftOptions& options);

// Everything needed to continue an experiment at `next_cycle`.
struct ExperimentState {
  static constexpr const char* kFormatTag = "agentcrm.experiment_state";
  static constexpr int kFormatVersion = 1;

  std::uint64_t seed = 0;
  int next_cycle = 0;
  PosteriorStore store;
  // user_id -> per-metric accumulators over the cycles run so far.
  std::map<std::string, std::vector<double>> metric_totals;
  // Events generated in earlier cycles that fall in later ones.
  std::map<std::string, std::vector<EventRecord>> pending;
  // user_id -> last cycle a message was sent.
  std::map<std::string, int> last_send;

  nlohmann::json to_json() const;
  // Throws std::runtime_error on a corrupt or version-mismatched document.
  static ExperimentState from_json(const nlohmann::json& doc);
};

struct ExperimentResult {
  ExperimentState state;
  // Present once the final cycle has run.
  std::optional<LiftReport> report;
  std::vector<std::string> decision_log;
  std::vector<std::string> estimate_log;
  std::vector<std::string> treated_users;
  std::vector<std::string> control_users;
  EventWeightTable weights;
};

struct RunOptions {
  // Continue from a saved state instead of starting at cycle 0.
  std::optional<ExperimentState> resume;
  // Stop after running this many cycles in total (cycle index < stop_after).
  std::optional<int> stop_after;
};

// Runs the decide -> send -> measure -> update loop over a simulated
// population. Users are split into treatment and control by a seeded coin;
// only treated users receive agentic messages, and each treated user's
// controls are its nearest control-group neighbours on warm-up profiles.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

// Writes decisions.jsonl, estimates.jsonl, state.json, weights.json and,
// when present, lift_report.json and lift_report.txt into dir.
void write_outputs(const ExperimentResult& result, const std::string& dir);

void snapshot_state(const PosteriorStore& store, const std::string& path);
// Throws std::runtime_error if the file is missing, truncated, corrupt or of
// another format version.
PosteriorStore restore_state(const std::string& path);

void save_experiment_state(const ExperimentState& state, const std::string& path);
ExperimentState load_experiment_state(const std::string& path);

}  // namespace agentcrm
