// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "agentcrm/simulator.h"

namespace agentcrm {
namespace {

const ActionSpace kSpace({{"tone", {"a", "b", "c"}}, {"channel", {"x", "y"}}});

SimConfig basic(double amplitude = 0.0) {
  SimConfig cfg;
  cfg.n_users = 20;
  cfg.seed = 99;
  cfg.horizon = 400 * kMillisPerDay;
  cfg.base_rates = {{"open", 5.0}, {"cart", 2.0}};
  cfg.seasonal_amplitude = amplitude;
  cfg.goal_spec = GoalSpec{{"buy"}, kMillisPerHour};
  cfg.precursors = {{"cart", 0.4, kMillisPerHour / 2}};
  cfg.goal_event = "buy";
  return cfg;
}

int count(const EventStream& s, const std::string& name) {
  int n = 0;
  for (const auto& r : s.records()) n += r.event_name == name;
  return n;
}

TEST(Population, DeterministicAndSized) {
  SimConfig cfg = basic();
  cfg.preferences = {PreferenceModel::Kind::kLogNormal, "", 1.0, 0.5};
  cfg.activity_sigma = 0.3;
  const auto a = generate_population(cfg, kSpace);
  const auto b = generate_population(cfg, kSpace);
  ASSERT_EQ(a.size(), 20u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].user_id, b[i].user_id);
    EXPECT_EQ(a[i].preference, b[i].preference);
    EXPECT_EQ(a[i].rate_scale, b[i].rate_scale);
  }
  cfg.n_users = 0;
  EXPECT_TRUE(generate_population(cfg, kSpace).empty());
}

TEST(Population, NullPreferencesAreInert) {
  const auto users = generate_population(basic(), kSpace);
  for (const auto& u : users) {
    for (const auto& set : kSpace.sets()) {
      for (const auto& l : set.labels) EXPECT_EQ(u.lift(set.name, l), 1.0);
    }
    EXPECT_EQ(u.effective_multiplier({{{"tone", "b"}, {"channel", "x"}}}), 1.0);
  }
}

TEST(Population, OneHotHasExactlyOnePreferredLabel) {
  SimConfig cfg = basic();
  cfg.preferences = {PreferenceModel::Kind::kOneHot, "tone", 2.0, 0.0};
  for (const auto& u : generate_population(cfg, kSpace)) {
    int preferred = 0;
    for (const auto& l : kSpace.sets()[0].labels) preferred += u.lift("tone", l) == 2.0;
    EXPECT_EQ(preferred, 1);
  }
}

TEST(Population, InvalidConfigRejected) {
  SimConfig cfg = basic();
  cfg.seasonal_amplitude = 1.0;
  EXPECT_THROW(generate_population(cfg, kSpace), std::invalid_argument);
  cfg = basic();
  cfg.base_rates["open"] = -1.0;
  EXPECT_THROW(generate_population(cfg, kSpace), std::invalid_argument);
}

TEST(Organic, HomogeneousRateWithinThreeSigma) {
  const SimConfig cfg = basic();
  const auto users = generate_population(cfg, kSpace);
  const Interval window(0, 400 * kMillisPerDay);
  const EventStream s = simulate_organic(users[0], cfg, window, Rng(1));
  const double expected = 5.0 * 400;
  EXPECT_LT(std::fabs(count(s, "open") - expected), 3 * std::sqrt(expected));
}

TEST(Organic, SeasonalShapeFollowsTheSine) {
  // Counts in the rising and falling half-periods differ by 2A/pi.
  const SimConfig cfg = basic(0.5);
  const auto users = generate_population(cfg, kSpace);
  const EventStream s = simulate_organic(users[0], cfg, Interval(0, 400 * kMillisPerDay), Rng(2));
  double first = 0;
  double second = 0;
  for (const auto& r : s.records()) {
    if (r.event_name != "open") continue;
    ((r.timestamp % kMillisPerDay) < kMillisPerDay / 2 ? first : second) += 1;
  }
  const double half = 5.0 * 400 / 2;
  const double want_first = half * (1 + 2 * 0.5 / M_PI);
  EXPECT_LT(std::fabs(first - want_first), 4 * std::sqrt(want_first));
  EXPECT_GT(first, second);
}

TEST(Organic, ZeroRatesGiveEmptyStream) {
  SimConfig cfg = basic();
  cfg.base_rates = {{"open", 0.0}};
  cfg.precursors.clear();
  const auto users = generate_population(cfg, kSpace);
  EXPECT_TRUE(simulate_organic(users[0], cfg, Interval(0, kMillisPerDay), Rng(3)).empty());
}

TEST(Organic, DeterministicGivenSeed) {
  const SimConfig cfg = basic(0.3);
  const auto users = generate_population(cfg, kSpace);
  const Interval w(0, 10 * kMillisPerDay);
  EXPECT_EQ(simulate_organic(users[3], cfg, w, Rng(4)), simulate_organic(users[3], cfg, w, Rng(4)));
  EXPECT_NE(simulate_organic(users[3], cfg, w, Rng(4)), simulate_organic(users[3], cfg, w, Rng(5)));
}

TEST(Organic, GoalsFollowPrecursors) {
  const SimConfig cfg = basic();
  const auto users = generate_population(cfg, kSpace);
  const EventStream s = simulate_organic(users[0], cfg, Interval(0, 200 * kMillisPerDay), Rng(6));
  const double carts = count(s, "cart");
  const double buys = count(s, "buy");
  EXPECT_NEAR(buys / carts, 0.4, 4 * std::sqrt(0.4 * 0.6 / carts));
}

TEST(Organic, WindowOutsideHorizonRejected) {
  const SimConfig cfg = basic();
  const auto users = generate_population(cfg, kSpace);
  EXPECT_THROW(simulate_organic(users[0], cfg, Interval(0, cfg.horizon + 1), Rng(7)), std::invalid_argument);
}

TEST(Intervention, MultiplierTwoDoublesTheMean) {
  SimConfig cfg = basic();
  cfg.preferences = {PreferenceModel::Kind::kUniform, "tone", 2.0, 0.0};
  cfg.precursors.clear();
  cfg.lift_events = {"cart"};
  const auto users = generate_population(cfg, kSpace);
  const ActionCombo combo{{{"tone", "a"}, {"channel", "x"}}};
  const Timestamp t = 10 * kMillisPerDay;
  const Interval effect(t, t + cfg.effect_duration);
  double treated = 0;
  double organic = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const Rng r = Rng(8).split(static_cast<std::uint64_t>(rep));
    treated += count(apply_intervention(users[0], combo, t, cfg, r.split(0)), "cart");
    organic += count(simulate_organic(users[0], cfg, effect, r.split(1)), "cart");
  }
  const double mu = 2.0 * 0.5 * 1000;  // 2/day over half a day, 1000 replicates
  EXPECT_LT(std::fabs(organic - mu), 4 * std::sqrt(mu));
  EXPECT_LT(std::fabs(treated - 2 * mu), 4 * std::sqrt(2 * mu));
}

TEST(Intervention, NeutralComboMatchesOrganicExactly) {
  // Same seed through the same time-rescaling gives the same draws.
  const SimConfig cfg = basic(0.4);
  const auto users = generate_population(cfg, kSpace);
  const Timestamp t = 3 * kMillisPerDay;
  const EventStream a = apply_intervention(users[1], {{{"tone", "a"}, {"channel", "x"}}}, t, cfg, Rng(9));
  const EventStream b = simulate_window(users[1], cfg, Interval(t, t + cfg.effect_duration), 1.0, Rng(9));
  EXPECT_EQ(a, b);
}

TEST(Intervention, ZeroResponsivenessIsInert) {
  SimConfig cfg = basic();
  cfg.preferences = {PreferenceModel::Kind::kUniform, "tone", 3.0, 0.0};
  cfg.responsiveness_min = 0.0;
  cfg.responsiveness_max = 0.0;
  const auto users = generate_population(cfg, kSpace);
  const ActionCombo combo{{{"tone", "c"}, {"channel", "y"}}};
  EXPECT_EQ(users[0].effective_multiplier(combo), 1.0);
  const Timestamp t = 5 * kMillisPerDay;
  EXPECT_EQ(apply_intervention(users[0], combo, t, cfg, Rng(10)),
            simulate_window(users[0], cfg, Interval(t, t + cfg.effect_duration), 1.0, Rng(10)));
}

TEST(Intervention, ProductOfLifts) {
  LatentUser u;
  u.preference = {{{"tone", "a"}, 2.0}, {{"channel", "x"}, 1.5}};
  u.responsiveness = 0.5;
  EXPECT_DOUBLE_EQ(u.effective_multiplier({{{"tone", "a"}, {"channel", "x"}}}), 1 + 0.5 * (3.0 - 1));
}

TEST(BernoulliArms, RatesAndBest) {
  const BernoulliArms arms({0.2, 0.7, 0.1});
  EXPECT_EQ(arms.best_arm(), 1u);
  Rng rng(11);
  int hits = 0;
  for (int i = 0; i < 20000; ++i) hits += arms.pull(1, rng);
  EXPECT_NEAR(hits / 20000.0, 0.7, 4 * std::sqrt(0.21 / 20000));
}

TEST(SimConfig, JsonRoundTrip) {
  SimConfig cfg = basic(0.2);
  cfg.preferences = {PreferenceModel::Kind::kOneHot, "tone", 2.0, 0.0};
  cfg.segments = {{"premium", 0.25}};
  const SimConfig back = SimConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.to_json(), cfg.to_json());
}

}  // namespace
}  // namespace agentcrm
