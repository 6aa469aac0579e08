// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "agentcrm/ite.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "agentcrm/simd/kernels.h"

namespace agentcrm {

using nlohmann::json;

void validate(const DidConfig& cfg) {
  if (cfg.t_delta <= 0) throw std::invalid_argument("t_delta must be positive");
  if (cfg.k_controls < 1) throw std::invalid_argument("k_controls must be at least 1");
  if (cfg.half_life <= 0) throw std::invalid_argument("half_life must be positive");
}

json IteEstimate::to_json() const {
  return {{"delta_y", delta_y},
          {"delta_y_treated", delta_y_treated},
          {"delta_y_control", delta_y_control},
          {"control_ids", control_ids},
          {"control_deltas", control_deltas},
          {"reward_bit", reward_bit},
          {"treated_pre", treated_pre},
          {"treated_post", treated_post},
          {"control_pre", control_pre},
          {"control_post", control_post}};
}

std::pair<Interval, Interval> pre_post_windows(Timestamp t_int, Duration t_delta) {
  if (t_delta <= 0) throw std::invalid_argument("t_delta must be positive");
  return {Interval(t_int - t_delta, t_int), Interval(t_int, t_int + t_delta)};
}

IteEstimate did_estimate(const EventStream& treated, const InterventionRecord& intervention,
                         std::span<const EventStream* const> controls,
                         const EventWeightTable& table, const DidConfig& cfg) {
  validate(cfg);
  if (controls.empty()) throw NoControlsError("no control streams for " + intervention.user_id);

  const auto [pre, post] = pre_post_windows(intervention.t_int, cfg.t_delta);
  const DecayConfig decay{cfg.half_life, intervention.t_int};

  IteEstimate est;
  est.treated_pre = outcome_score(treated, pre, table, decay).value;
  est.treated_post = outcome_score(treated, post, table, decay).value;

  double pre_sum = 0.0;
  double post_sum = 0.0;
  est.control_ids.reserve(controls.size());
  est.control_deltas.reserve(controls.size());
  for (const EventStream* c : controls) {
    const double y_pre = outcome_score(*c, pre, table, decay).value;
    const double y_post = outcome_score(*c, post, table, decay).value;
    pre_sum += y_pre;
    post_sum += y_post;
    est.control_ids.push_back(c->user_id());
    est.control_deltas.push_back(y_post - y_pre);
  }
  const double n = static_cast<double>(controls.size());
  est.control_pre = pre_sum / n;
  est.control_post = post_sum / n;

  est.delta_y_treated = est.treated_post - est.treated_pre;
  est.delta_y_control = est.control_post - est.control_pre;
  est.delta_y = est.delta_y_treated - est.delta_y_control;
  est.reward_bit = binarize(est.delta_y, cfg.binarize_threshold);
  return est;
}

IteEstimate did_estimate(const EventStream& treated, const InterventionRecord& intervention,
                         std::span<const EventStream> controls, const EventWeightTable& table,
                         const DidConfig& cfg) {
  std::vector<const EventStream*> ptrs;
  ptrs.reserve(controls.size());
  for (const auto& c : controls) ptrs.push_back(&c);
  return did_estimate(treated, intervention, ptrs, table, cfg);
}

UserProfile build_profile(const EventStream& stream, std::span<const std::string> vocabulary,
                          const Interval& window) {
  UserProfile p{stream.user_id(), std::vector<double>(vocabulary.size(), 0.0)};
  for (const auto& r : stream.view(window)) {
    auto it = std::find(vocabulary.begin(), vocabulary.end(), r.event_name);
    if (it != vocabulary.end()) p.features[it - vocabulary.begin()] += 1.0;
  }
  double norm2 = 0.0;
  for (double f : p.features) norm2 += f * f;
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& f : p.features) f *= inv;
  }
  return p;
}

ControlPool::ControlPool(std::span<const UserProfile> candidates) {
  if (candidates.empty()) return;
  dim_ = candidates.front().features.size();
  const std::size_t n = candidates.size();
  ids_.reserve(n);
  columns_.assign(dim_ * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (candidates[i].features.size() != dim_) {
      throw std::invalid_argument("profile dimension mismatch for '" + candidates[i].user_id + "'");
    }
    ids_.push_back(candidates[i].user_id);
    for (std::size_t j = 0; j < dim_; ++j) columns_[j * n + i] = candidates[i].features[j];
  }
}

std::vector<std::size_t> ControlPool::rank(std::span<const double> query) const {
  if (query.size() != dim_ && !ids_.empty()) {
    throw std::invalid_argument("query dimension does not match the control pool");
  }
  std::vector<double> dist(ids_.size());
  simd::squared_distances(query, columns_, dist);
  std::vector<std::size_t> order(ids_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    return ids_[a] < ids_[b];
  });
  return order;
}

ControlSelection ControlPool::select(const UserProfile& treated, std::size_t k,
                                     const std::function<bool(const std::string&)>& eligible) const {
  if (ids_.empty()) throw NoControlsError("empty control pool for " + treated.user_id);
  if (treated.features.size() != dim_) {
    throw std::invalid_argument("profile dimension mismatch for '" + treated.user_id + "'");
  }
  std::vector<double> dist(ids_.size());
  simd::squared_distances(treated.features, columns_, dist);

  std::vector<std::size_t> order;
  order.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i] == treated.user_id) continue;
    if (eligible && !eligible(ids_[i])) continue;
    order.push_back(i);
  }
  if (order.empty()) throw NoControlsError("no eligible controls for " + treated.user_id);

  auto closer = [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    return ids_[a] < ids_[b];
  };
  ControlSelection out;
  const std::size_t take = std::min(k, order.size());
  out.shortfall = take < k;
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    closer);
  out.user_ids.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.user_ids.push_back(ids_[order[i]]);
  return out;
}

ControlSelection select_controls(const UserProfile& treated,
                                 std::span<const UserProfile> candidates, std::size_t k,
                                 const std::function<bool(const std::string&)>& eligible) {
  if (candidates.empty()) throw NoControlsError("empty control pool for " + treated.user_id);
  for (const auto& c : candidates) {
    if (c.user_id == treated.user_id) {
      throw std::invalid_argument("control pool contains the treated user '" + c.user_id + "'");
    }
    if (eligible && !eligible(c.user_id)) {
      throw std::invalid_argument("control pool contains ineligible user '" + c.user_id + "'");
    }
  }
  return ControlPool(candidates).select(treated, k);
}

}  // namespace agentcrm
