// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "agentcrm/simulator.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace agentcrm {

using nlohmann::json;

namespace {

constexpr double kHour = static_cast<double>(kMillisPerHour);

// g(t) = t + c (1 - cos(w t)) is the cumulative intensity divided by the mean
// per-ms rate. Its derivative 1 + A sin(w t) is at least 1 - A > 0.
struct SeasonalClock {
  double c = 0.0;
  double w = 0.0;
  double amplitude = 0.0;

  SeasonalClock(double a, Duration period)
      : c(a * static_cast<double>(period) / (2.0 * std::numbers::pi)),
        w(2.0 * std::numbers::pi / static_cast<double>(period)),
        amplitude(a) {}

  double g(double t) const { return t + c * (1.0 - std::cos(w * t)); }
  double dg(double t) const { return 1.0 + amplitude * std::sin(w * t); }

  // Solve g(t) = target for t in [lo, hi], where g(lo) <= target <= g(hi).
  double invert(double target, double lo, double hi) const {
    if (amplitude == 0.0) return target;
    double t = std::clamp(lo + (target - g(lo)), lo, hi);
    for (int it = 0; it < 60; ++it) {
      const double f = g(t) - target;
      if (f > 0.0) {
        hi = t;
      } else {
        lo = t;
      }
      double next = t - f / dg(t);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - t) < 1e-3) return next;
      t = next;
    }
    return t;
  }
};

Timestamp to_timestamp(double t, const Interval& window) {
  const auto ts = static_cast<Timestamp>(std::floor(t));
  return std::clamp<Timestamp>(ts, window.begin, window.end - 1);
}

}  // namespace

std::set<std::string> SimConfig::effective_lift_events() const {
  if (!lift_events.empty()) return lift_events;
  std::set<std::string> out;
  for (const auto& p : precursors) out.insert(p.event);
  return out;
}

void validate(const SimConfig& cfg) {
  if (cfg.n_users < 0) throw std::invalid_argument("n_users must be non-negative");
  if (cfg.horizon <= 0) throw std::invalid_argument("horizon must be positive");
  if (!(cfg.seasonal_amplitude >= 0.0 && cfg.seasonal_amplitude < 1.0)) {
    throw std::invalid_argument("seasonal_amplitude must be in [0, 1)");
  }
  if (cfg.seasonal_period <= 0) throw std::invalid_argument("seasonal_period must be positive");
  for (const auto& [name, rate] : cfg.base_rates) {
    if (name.empty()) throw std::invalid_argument("base rate for an unnamed event");
    if (!(rate >= 0.0 && std::isfinite(rate))) {
      throw std::invalid_argument("base rate for '" + name + "' must be finite and >= 0");
    }
  }
  validate(cfg.goal_spec);
  if (!cfg.precursors.empty() && !cfg.goal_spec.is_goal(cfg.goal_event)) {
    throw std::invalid_argument("goal_event '" + cfg.goal_event + "' is not a goal event");
  }
  for (const auto& p : cfg.precursors) {
    if (!(p.goal_probability >= 0.0 && p.goal_probability <= 1.0)) {
      throw std::invalid_argument("goal_probability must be in [0, 1]");
    }
    if (p.max_delay <= 0) throw std::invalid_argument("precursor max_delay must be positive");
  }
  if (cfg.effect_duration <= 0) throw std::invalid_argument("effect_duration must be positive");
  if (cfg.activity_sigma < 0.0 || cfg.mix_sigma < 0.0 || cfg.goal_value_sigma < 0.0) {
    throw std::invalid_argument("sigmas must be non-negative");
  }
  if (!(0.0 <= cfg.responsiveness_min && cfg.responsiveness_min <= cfg.responsiveness_max &&
        cfg.responsiveness_max <= 1.0)) {
    throw std::invalid_argument("responsiveness range must satisfy 0 <= min <= max <= 1");
  }
  if (cfg.preferences.multiplier < 0.0 || !std::isfinite(cfg.preferences.multiplier)) {
    throw std::invalid_argument("preference multiplier must be finite and >= 0");
  }
  for (const auto& s : cfg.segments) {
    if (!(s.fraction >= 0.0 && s.fraction <= 1.0)) {
      throw std::invalid_argument("segment fraction must be in [0, 1]");
    }
  }
}

namespace {

PreferenceModel::Kind parse_kind(const std::string& s) {
  if (s == "none") return PreferenceModel::Kind::kNone;
  if (s == "uniform") return PreferenceModel::Kind::kUniform;
  if (s == "one_hot") return PreferenceModel::Kind::kOneHot;
  if (s == "lognormal") return PreferenceModel::Kind::kLogNormal;
  throw std::invalid_argument("unknown preference model '" + s + "'");
}

std::string kind_name(PreferenceModel::Kind k) {
  switch (k) {
    case PreferenceModel::Kind::kNone:
      return "none";
    case PreferenceModel::Kind::kUniform:
      return "uniform";
    case PreferenceModel::Kind::kOneHot:
      return "one_hot";
    case PreferenceModel::Kind::kLogNormal:
      return "lognormal";
  }
  return "none";
}

Duration hours(double h) { return static_cast<Duration>(std::llround(h * kHour)); }

}  // namespace

json SimConfig::to_json() const {
  json precursor_list = json::array();
  for (const auto& p : precursors) {
    precursor_list.push_back({{"event", p.event},
                              {"goal_probability", p.goal_probability},
                              {"max_delay_hours", static_cast<double>(p.max_delay) / kHour}});
  }
  json segment_list = json::array();
  for (const auto& s : segments) segment_list.push_back({{"tag", s.tag}, {"fraction", s.fraction}});
  return {
      {"n_users", n_users},
      {"horizon_hours", static_cast<double>(horizon) / kHour},
      {"seed", seed},
      {"base_rates", base_rates},
      {"seasonal_amplitude", seasonal_amplitude},
      {"seasonal_period_hours", static_cast<double>(seasonal_period) / kHour},
      {"goal",
       {{"events", goal_spec.goal_event_names},
        {"attribution_window_hours", static_cast<double>(goal_spec.attribution_window) / kHour}}},
      {"precursors", precursor_list},
      {"goal_event", goal_event},
      {"goal_value_mean", goal_value_mean},
      {"goal_value_sigma", goal_value_sigma},
      {"lift_events", lift_events},
      {"effect_duration_hours", static_cast<double>(effect_duration) / kHour},
      {"activity_sigma", activity_sigma},
      {"mix_sigma", mix_sigma},
      {"preferences",
       {{"kind", kind_name(preferences.kind)},
        {"action_set", preferences.action_set},
        {"multiplier", preferences.multiplier},
        {"sigma", preferences.sigma}}},
      {"responsiveness", {responsiveness_min, responsiveness_max}},
      {"segments", segment_list},
  };
}

SimConfig SimConfig::from_json(const json& doc) {
  SimConfig cfg;
  cfg.n_users = doc.value("n_users", cfg.n_users);
  if (doc.contains("horizon_hours")) cfg.horizon = hours(doc.at("horizon_hours").get<double>());
  cfg.seed = doc.value("seed", cfg.seed);
  cfg.base_rates = doc.value("base_rates", cfg.base_rates);
  cfg.seasonal_amplitude = doc.value("seasonal_amplitude", cfg.seasonal_amplitude);
  if (doc.contains("seasonal_period_hours")) {
    cfg.seasonal_period = hours(doc.at("seasonal_period_hours").get<double>());
  }
  if (doc.contains("goal")) {
    const json& g = doc.at("goal");
    cfg.goal_spec.goal_event_names = g.at("events").get<std::set<std::string>>();
    if (g.contains("attribution_window_hours")) {
      cfg.goal_spec.attribution_window = hours(g.at("attribution_window_hours").get<double>());
    }
  }
  if (doc.contains("precursors")) {
    for (const auto& p : doc.at("precursors")) {
      cfg.precursors.push_back({p.at("event").get<std::string>(),
                                p.at("goal_probability").get<double>(),
                                hours(p.value("max_delay_hours", 1.0))});
    }
  }
  cfg.goal_event = doc.value("goal_event", cfg.goal_spec.goal_event_names.empty()
                                               ? std::string()
                                               : *cfg.goal_spec.goal_event_names.begin());
  cfg.goal_value_mean = doc.value("goal_value_mean", cfg.goal_value_mean);
  cfg.goal_value_sigma = doc.value("goal_value_sigma", cfg.goal_value_sigma);
  cfg.lift_events = doc.value("lift_events", cfg.lift_events);
  if (doc.contains("effect_duration_hours")) {
    cfg.effect_duration = hours(doc.at("effect_duration_hours").get<double>());
  }
  cfg.activity_sigma = doc.value("activity_sigma", cfg.activity_sigma);
  cfg.mix_sigma = doc.value("mix_sigma", cfg.mix_sigma);
  if (doc.contains("preferences")) {
    const json& p = doc.at("preferences");
    cfg.preferences.kind = parse_kind(p.value("kind", std::string("none")));
    cfg.preferences.action_set = p.value("action_set", std::string());
    cfg.preferences.multiplier = p.value("multiplier", 1.0);
    cfg.preferences.sigma = p.value("sigma", 0.0);
  }
  if (doc.contains("responsiveness")) {
    const auto r = doc.at("responsiveness").get<std::vector<double>>();
    if (r.size() != 2) throw std::invalid_argument("responsiveness must be [min, max]");
    cfg.responsiveness_min = r[0];
    cfg.responsiveness_max = r[1];
  }
  if (doc.contains("segments")) {
    for (const auto& s : doc.at("segments")) {
      cfg.segments.push_back({s.at("tag").get<std::string>(), s.at("fraction").get<double>()});
    }
  }
  return cfg;
}

double LatentUser::lift(const std::string& set, const std::string& label) const {
  auto it = preference.find({set, label});
  return it == preference.end() ? 1.0 : it->second;
}

double LatentUser::effective_multiplier(const ActionCombo& combo) const {
  double product = 1.0;
  for (const auto& [set, label] : combo.choices) product *= lift(set, label);
  return 1.0 + responsiveness * (product - 1.0);
}

std::string simulated_user_id(int index, int n_users) {
  std::string digits = std::to_string(index);
  const std::size_t width = std::max<std::size_t>(5, std::to_string(std::max(n_users - 1, 0)).size());
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return "u" + digits;
}

LatentUser generate_user(const SimConfig& cfg, const ActionSpace& space, int index) {
  Rng rng = Rng(cfg.seed).split("population", static_cast<std::uint64_t>(index));
  LatentUser u;
  u.user_id = simulated_user_id(index, cfg.n_users);

  auto lognormal_unit_mean = [&](double sigma) {
    const double z = rng.normal();
    return sigma == 0.0 ? 1.0 : std::exp(sigma * z - 0.5 * sigma * sigma);
  };
  const double activity = lognormal_unit_mean(cfg.activity_sigma);
  for (const auto& [event, rate] : cfg.base_rates) {
    u.rate_scale[event] = activity * lognormal_unit_mean(cfg.mix_sigma);
  }

  const PreferenceModel& pm = cfg.preferences;
  switch (pm.kind) {
    case PreferenceModel::Kind::kNone:
      break;
    case PreferenceModel::Kind::kUniform:
    case PreferenceModel::Kind::kOneHot: {
      const ActionSet* set = space.find(pm.action_set);
      if (set == nullptr) {
        throw std::invalid_argument("preference action set '" + pm.action_set + "' not in space");
      }
      if (pm.kind == PreferenceModel::Kind::kUniform) {
        for (const auto& label : set->labels) u.preference[{set->name, label}] = pm.multiplier;
      } else {
        const auto pick = rng.uniform_int(set->labels.size());
        u.preference[{set->name, set->labels[pick]}] = pm.multiplier;
      }
      break;
    }
    case PreferenceModel::Kind::kLogNormal:
      for (const auto& set : space.sets()) {
        for (const auto& label : set.labels) {
          u.preference[{set.name, label}] = std::exp(pm.sigma * rng.normal());
        }
      }
      break;
  }

  u.responsiveness = cfg.responsiveness_min +
                     (cfg.responsiveness_max - cfg.responsiveness_min) * rng.uniform();
  for (const auto& seg : cfg.segments) {
    if (rng.uniform() < seg.fraction) u.tags.insert(seg.tag);
  }
  return u;
}

std::vector<LatentUser> generate_population(const SimConfig& cfg, const ActionSpace& space) {
  validate(cfg);
  std::vector<LatentUser> users;
  users.reserve(static_cast<std::size_t>(cfg.n_users));
  for (int i = 0; i < cfg.n_users; ++i) users.push_back(generate_user(cfg, space, i));
  return users;
}

EventStream simulate_window(const LatentUser& user, const SimConfig& cfg, const Interval& window,
                            double multiplier, Rng rng) {
  if (window.begin < 0 || window.end > cfg.horizon) {
    throw std::invalid_argument("simulation window outside the horizon");
  }
  if (!(multiplier >= 0.0)) throw std::invalid_argument("rate multiplier must be >= 0");

  const SeasonalClock clock(cfg.seasonal_amplitude, cfg.seasonal_period);
  const std::set<std::string> lifted = cfg.effective_lift_events();
  const double a = static_cast<double>(window.begin);
  const double b = static_cast<double>(window.end);
  const double g_a = clock.g(a);
  const double g_b = clock.g(b);

  std::vector<EventRecord> records;
  for (const auto& [event, base_per_day] : cfg.base_rates) {
    auto scale_it = user.rate_scale.find(event);
    const double scale = scale_it == user.rate_scale.end() ? 1.0 : scale_it->second;
    const double m = lifted.contains(event) ? multiplier : 1.0;
    // Expected events per ms, before seasonality.
    const double rate = base_per_day * scale * m / static_cast<double>(kMillisPerDay);
    if (rate <= 0.0 || window.empty()) continue;

    // Unit-rate arrivals mapped through the inverse cumulative intensity.
    Rng arrivals = rng.split(event);
    const double total = rate * (g_b - g_a);
    double s = arrivals.exponential(1.0);
    while (s < total) {
      const double t = clock.invert(g_a + s / rate, a, b);
      records.push_back({user.user_id, to_timestamp(t, window), event, std::nullopt});
      s += arrivals.exponential(1.0);
    }
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const EventRecord& x, const EventRecord& y) { return x.timestamp < y.timestamp; });

  if (!cfg.precursors.empty()) {
    Rng goals = rng.split("goal");
    const double sigma = cfg.goal_value_sigma;
    const double mu = cfg.goal_value_mean > 0.0 ? std::log(cfg.goal_value_mean) - 0.5 * sigma * sigma
                                                : 0.0;
    std::vector<EventRecord> spawned;
    for (const auto& r : records) {
      for (const auto& rule : cfg.precursors) {
        if (rule.event != r.event_name) continue;
        if (goals.uniform() >= rule.goal_probability) continue;
        const auto delay =
            1 + static_cast<Duration>(goals.uniform() * static_cast<double>(rule.max_delay));
        EventRecord g{user.user_id, r.timestamp + std::min(delay, rule.max_delay), cfg.goal_event,
                      std::nullopt};
        if (cfg.goal_value_mean > 0.0) g.value = std::exp(mu + sigma * goals.normal());
        spawned.push_back(std::move(g));
      }
    }
    records.insert(records.end(), spawned.begin(), spawned.end());
  }
  return EventStream(user.user_id, std::move(records));
}

EventStream simulate_organic(const LatentUser& user, const SimConfig& cfg, const Interval& window,
                             Rng rng) {
  return simulate_window(user, cfg, window, 1.0, std::move(rng));
}

EventStream apply_intervention(const LatentUser& user, const ActionCombo& combo, Timestamp t_int,
                               const SimConfig& cfg, Rng rng, double background) {
  const Interval window(t_int, std::min(t_int + cfg.effect_duration, cfg.horizon));
  return simulate_window(user, cfg, window, background * user.effective_multiplier(combo),
                         std::move(rng));
}

BernoulliArms::BernoulliArms(std::vector<double> success_rates) : rates_(std::move(success_rates)) {
  if (rates_.empty()) throw std::invalid_argument("need at least one arm");
  for (double p : rates_) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("arm rate must be in [0, 1]");
  }
}

int BernoulliArms::pull(std::size_t arm, Rng& rng) const {
  return rng.uniform() < rates_.at(arm) ? 1 : 0;
}

std::size_t BernoulliArms::best_arm() const {
  return static_cast<std::size_t>(std::max_element(rates_.begin(), rates_.end()) - rates_.begin());
}

}  // namespace agentcrm
