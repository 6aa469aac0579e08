// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "agentcrm/outcome.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "agentcrm/simd/kernels.h"

namespace agentcrm {

using nlohmann::json;

EventWeightTable::EventWeightTable(std::map<std::string, double> weights, double smoothing,
                                   GoalSpec goal)
    : weights_(std::move(weights)), smoothing_(smoothing), goal_(std::move(goal)) {
  for (const auto& [name, w] : weights_) {
    if (!std::isfinite(w)) throw std::invalid_argument("non-finite weight for '" + name + "'");
  }
}

double EventWeightTable::weight(const std::string& event_name) const {
  auto it = weights_.find(event_name);
  return it == weights_.end() ? 0.0 : it->second;
}

EventWeightTable EventWeightTable::scaled(double factor) const {
  auto w = weights_;
  for (auto& [name, value] : w) value *= factor;
  return EventWeightTable(std::move(w), smoothing_, goal_);
}

json EventWeightTable::to_json() const {
  return {{"weights", weights_},
          {"smoothing", smoothing_},
          {"goal",
           {{"events", goal_.goal_event_names},
            {"attribution_window_ms", goal_.attribution_window}}}};
}

EventWeightTable EventWeightTable::from_json(const json& doc) {
  GoalSpec goal;
  goal.goal_event_names = doc.at("goal").at("events").get<std::set<std::string>>();
  goal.attribution_window = doc.at("goal").at("attribution_window_ms").get<Duration>();
  validate(goal);
  return EventWeightTable(doc.at("weights").get<std::map<std::string, double>>(),
                          doc.at("smoothing").get<double>(), std::move(goal));
}

EventWeightTable fit_event_weights(std::span<const EventStream> streams, const GoalSpec& goal,
                                   double smoothing) {
  if (streams.empty()) throw std::invalid_argument("fit_event_weights needs at least one stream");
  if (!(smoothing > 0.0)) throw std::invalid_argument("smoothing must be positive");
  validate(goal);

  struct Counts {
    double goal = 0;
    double no_goal = 0;
  };
  std::map<std::string, Counts> counts;
  double total_goal = 0;
  double total_no_goal = 0;

  std::vector<Timestamp> goal_times;
  for (const auto& stream : streams) {
    goal_times.clear();
    for (const auto& r : stream.records()) {
      if (goal.is_goal(r.event_name)) goal_times.push_back(r.timestamp);
    }
    for (const auto& r : stream.records()) {
      // First goal strictly after r; a goal never attributes to itself.
      auto next = std::upper_bound(goal_times.begin(), goal_times.end(), r.timestamp);
      const bool followed =
          next != goal_times.end() && *next - r.timestamp <= goal.attribution_window;
      auto& c = counts[r.event_name];
      if (followed) {
        c.goal += 1;
        total_goal += 1;
      } else {
        c.no_goal += 1;
        total_no_goal += 1;
      }
    }
  }

  std::map<std::string, double> weights;
  const double a = smoothing;
  for (const auto& [name, c] : counts) {
    weights[name] = std::log((c.goal + a) / (total_goal + 2 * a)) -
                    std::log((c.no_goal + a) / (total_no_goal + 2 * a));
  }
  return EventWeightTable(std::move(weights), smoothing, goal);
}

double temporal_weight(Timestamp t, const DecayConfig& cfg) {
  const double elapsed = std::abs(static_cast<double>(t - cfg.reference));
  return std::exp2(-elapsed / static_cast<double>(cfg.half_life));
}

OutcomeScore outcome_score(const EventStream& stream, const Interval& window,
                           const EventWeightTable& table, const DecayConfig& cfg) {
  if (cfg.half_life <= 0) throw std::invalid_argument("half-life must be positive");

  thread_local std::vector<double> coeff;
  thread_local std::vector<double> offset;
  coeff.clear();
  offset.clear();
  for (const auto& r : stream.view(window)) {
    const double w = table.weight(r.event_name) * r.weight_value();
    if (w == 0.0) continue;
    coeff.push_back(w);
    offset.push_back(static_cast<double>(r.timestamp - cfg.reference));
  }
  const double y =
      simd::decayed_sum(coeff, offset, static_cast<double>(cfg.half_life));
  return {y, window, stream.user_id()};
}

}  // namespace agentcrm
