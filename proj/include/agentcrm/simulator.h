// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "agentcrm/action_space.h"
#include "agentcrm/event_model.h"
#include "agentcrm/rng.h"
#include "json.hpp"

namespace agentcrm {

// A precursor event that triggers a goal event shortly afterwards with some
// probability. This is what gives goal attribution something to find.
struct PrecursorRule {
  std::string event;
  double goal_probability = 0.0;
  Duration max_delay = kMillisPerHour;
};

// How latent per-(set, label) lift multipliers are drawn.
struct PreferenceModel {
  enum class Kind {
    kNone,       // every multiplier is 1: no causal effect
    kUniform,    // every label of `action_set` gets `multiplier`
    kOneHot,     // one uniformly drawn label of `action_set` gets `multiplier`
    kLogNormal,  // every (set, label) gets exp(sigma * Z)
  };
  Kind kind = Kind::kNone;
  std::string action_set;
  double multiplier = 1.0;
  double sigma = 0.0;
};

struct SegmentRule {
  std::string tag;
  double fraction = 0.0;
};

struct SimConfig {
  int n_users = 0;
  Duration horizon = 30 * kMillisPerDay;
  std::uint64_t seed = 0;
  // Events per day for an average user.
  std::map<std::string, double> base_rates;
  double seasonal_amplitude = 0.0;
  Duration seasonal_period = kMillisPerDay;
  GoalSpec goal_spec;

  std::vector<PrecursorRule> precursors;
  // Event emitted by precursor rules; must be one of goal_spec's events.
  std::string goal_event;
  // Goal events carry a log-normal value with this mean when > 0.
  double goal_value_mean = 0.0;
  double goal_value_sigma = 0.5;

  // Events whose rates an intervention multiplies. Empty means the precursor
  // events.
  std::set<std::string> lift_events;
  Duration effect_duration = 12 * kMillisPerHour;

  // Per-user heterogeneity: log-normal activity scale and per-event mix.
  double activity_sigma = 0.0;
  double mix_sigma = 0.0;

  PreferenceModel preferences;
  double responsiveness_min = 1.0;
  double responsiveness_max = 1.0;
  std::vector<SegmentRule> segments;

  std::set<std::string> effective_lift_events() const;

  nlohmann::json to_json() const;
  // Durations are read in hours (`horizon_hours`, ...). Missing keys keep
  // their defaults.
  static SimConfig from_json(const nlohmann::json& doc);
};

// Throws std::invalid_argument for an inconsistent configuration.
void validate(const SimConfig& cfg);

struct LatentUser {
  std::string user_id;
  // (set, label) -> multiplier on lift-event rates when that label is used.
  std::map<std::pair<std::string, std::string>, double> preference;
  double responsiveness = 1.0;
  // event -> this user's rate as a multiple of the base rate.
  std::map<std::string, double> rate_scale;
  std::set<std::string> tags;

  double lift(const std::string& set, const std::string& label) const;
  // 1 + responsiveness * (product of the combo's lifts - 1)
  double effective_multiplier(const ActionCombo& combo) const;
};

std::string simulated_user_id(int index, int n_users);

// Deterministic in cfg.seed; user i's draws depend only on (seed, i).
std::vector<LatentUser> generate_population(const SimConfig& cfg, const ActionSpace& space);
LatentUser generate_user(const SimConfig& cfg, const ActionSpace& space, int index);

// Organic events in window: a Poisson process per event with intensity
// base_rate * scale * (1 + A sin(2 pi t / period)), plus goal events spawned
// by precursor rules. Spawned goals can fall after window.end.
EventStream simulate_organic(const LatentUser& user, const SimConfig& cfg, const Interval& window,
                             Rng rng);

// Events in [t_int, t_int + effect_duration) with lift-event rates scaled by
// user.effective_multiplier(combo) and by `background`, a multiplier shared
// with untreated users (e.g. a rules-based message everyone receives).
// Given the same rng it reproduces simulate_organic exactly when both
// multipliers are 1.
EventStream apply_intervention(const LatentUser& user, const ActionCombo& combo, Timestamp t_int,
                               const SimConfig& cfg, Rng rng, double background = 1.0);

// Organic process with the lift events scaled by `multiplier`.
EventStream simulate_window(const LatentUser& user, const SimConfig& cfg, const Interval& window,
                            double multiplier, Rng rng);

// Stationary Bernoulli bandit for policy convergence checks.
class BernoulliArms {
 public:
  explicit BernoulliArms(std::vector<double> success_rates);
  int pull(std::size_t arm, Rng& rng) const;
  std::size_t size() const { return rates_.size(); }
  std::size_t best_arm() const;

 private:
  std::vector<double> rates_;
};

}  // namespace agentcrm
