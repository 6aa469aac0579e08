// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <map>
#include <span>
#include <string>

#include "agentcrm/event_model.h"
#include "json.hpp"

namespace agentcrm {

// Log-likelihood-ratio informativeness of each event name with respect to
// the goal events: w_e = ln P(e | goal follows) - ln P(e | no goal follows).
class EventWeightTable {
 public:
  EventWeightTable() = default;
  EventWeightTable(std::map<std::string, double> weights, double smoothing, GoalSpec goal);

  // Weight for an event name; names absent from the table weigh 0.
  double weight(const std::string& event_name) const;
  bool contains(const std::string& event_name) const { return weights_.contains(event_name); }

  const std::map<std::string, double>& weights() const { return weights_; }
  double smoothing() const { return smoothing_; }
  const GoalSpec& goal_spec() const { return goal_; }

  // Same table with every weight multiplied by factor.
  EventWeightTable scaled(double factor) const;

  nlohmann::json to_json() const;
  static EventWeightTable from_json(const nlohmann::json& doc);

  friend bool operator==(const EventWeightTable&, const EventWeightTable&) = default;

 private:
  std::map<std::string, double> weights_;
  double smoothing_ = 1.0;
  GoalSpec goal_;
};

// Counts each event occurrence as goal-followed when a goal event occurs in
// (t, t + attribution_window] of the same stream, then applies additive
// smoothing to both conditionals:
//   w_e = ln[(n_goal + a) / (N_goal + 2a)] - ln[(n_nogoal + a) / (N_nogoal + 2a)]
// Throws std::invalid_argument for empty input or smoothing <= 0.
EventWeightTable fit_event_weights(std::span<const EventStream> streams, const GoalSpec& goal,
                                   double smoothing = 1.0);

struct DecayConfig {
  Duration half_life = 6 * kMillisPerHour;
  Timestamp reference = 0;
};

// 0.5^(|t - reference| / half_life)
double temporal_weight(Timestamp t, const DecayConfig& cfg);

struct OutcomeScore {
  double value = 0.0;
  Interval window;
  std::string user_id;
};

// Y = sum over records in window of w_e * temporal_weight(t) * value.
OutcomeScore outcome_score(const EventStream& stream, const Interval& window,
                           const EventWeightTable& table, const DecayConfig& cfg);

}  // namespace agentcrm
