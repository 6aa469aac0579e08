// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "agentcrm/action_space.h"
#include "agentcrm/event_model.h"
#include "agentcrm/outcome.h"
#include "json.hpp"

namespace agentcrm {

struct InterventionRecord {
  std::string user_id;
  Timestamp t_int = 0;
  ActionCombo action_combo;
  std::string context_key;
};

struct DidConfig {
  Duration t_delta = 12 * kMillisPerHour;
  int k_controls = 10;
  double binarize_threshold = 0.0;
  // Decay half-life of the outcome scores; the decay reference is t_int.
  Duration half_life = 6 * kMillisPerHour;
};

void validate(const DidConfig& cfg);

struct IteEstimate {
  double delta_y = 0.0;
  double delta_y_treated = 0.0;
  double delta_y_control = 0.0;
  std::vector<std::string> control_ids;
  std::vector<double> control_deltas;  // post - pre per control, same order
  int reward_bit = 0;

  // Window scores behind the deltas; control values are means over controls.
  double treated_pre = 0.0;
  double treated_post = 0.0;
  double control_pre = 0.0;
  double control_post = 0.0;

  nlohmann::json to_json() const;
};

// pre = [t_int - t_delta, t_int), post = [t_int, t_int + t_delta).
std::pair<Interval, Interval> pre_post_windows(Timestamp t_int, Duration t_delta);

// 1 if delta_y > threshold, else 0.
inline int binarize(double delta_y, double threshold) { return delta_y > threshold ? 1 : 0; }

class NoControlsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Difference-in-differences effect of one intervention:
//   (Y_T(post) - Y_T(pre)) - (mean_C Y_C(post) - mean_C Y_C(pre))
// with every score decayed around t_int. Throws NoControlsError when
// controls is empty.
IteEstimate did_estimate(const EventStream& treated, const InterventionRecord& intervention,
                         std::span<const EventStream* const> controls,
                         const EventWeightTable& table, const DidConfig& cfg);
IteEstimate did_estimate(const EventStream& treated, const InterventionRecord& intervention,
                         std::span<const EventStream> controls, const EventWeightTable& table,
                         const DidConfig& cfg);

// ---------------------------------------------------------------------------
// Control selection

// L2-normalised per-event-name frequencies over a profile window. Inactive
// users have the zero vector.
struct UserProfile {
  std::string user_id;
  std::vector<double> features;
};

UserProfile build_profile(const EventStream& stream, std::span<const std::string> vocabulary,
                          const Interval& window);

struct ControlSelection {
  std::vector<std::string> user_ids;
  // Fewer than k eligible candidates were available.
  bool shortfall = false;
};

// Candidate profiles packed column-major for repeated nearest-neighbour
// queries against the same pool.
class ControlPool {
 public:
  ControlPool() = default;
  explicit ControlPool(std::span<const UserProfile> candidates);

  std::size_t size() const { return ids_.size(); }
  std::size_t dimension() const { return dim_; }
  const std::vector<std::string>& user_ids() const { return ids_; }

  // The k candidates closest to treated in Euclidean distance, ties broken
  // by user_id. Candidates rejected by `eligible` are skipped. Throws
  // NoControlsError if no candidate remains.
  ControlSelection select(const UserProfile& treated, std::size_t k,
                          const std::function<bool(const std::string&)>& eligible = {}) const;

  // Indices into user_ids() ordered by distance to query, ties by user_id.
  std::vector<std::size_t> rank(std::span<const double> query) const;

 private:
  std::vector<std::string> ids_;
  std::vector<double> columns_;
  std::size_t dim_ = 0;
};

// Nearest-neighbour control group for a treated user.
//
// The candidate pool must exclude the treated user and anyone treated near
// t_int; `eligible` (when given) states that condition and any candidate it
// rejects raises std::invalid_argument. A pool containing the treated user's
// own id is rejected the same way. Throws NoControlsError for an empty pool.
ControlSelection select_controls(const UserProfile& treated,
                                 std::span<const UserProfile> candidates, std::size_t k,
                                 const std::function<bool(const std::string&)>& eligible = {});

}  // namespace agentcrm
