// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "../test_support.h"
#include "agentcrm/harness.h"

namespace agentcrm {
namespace {

namespace fs = std::filesystem;

std::map<std::string, UserProfile> line_profiles(int n, const std::string& prefix, double offset) {
  std::map<std::string, UserProfile> out;
  for (int i = 0; i < n; ++i) {
    const std::string id = prefix + std::to_string(10000 + i);
    out[id] = {id, {static_cast<double>(i) + offset}};
  }
  return out;
}

TEST(MatchedLift, IdenticalOutcomesGiveZero) {
  const auto tp = line_profiles(200, "t", 0.0);
  const auto cp = line_profiles(200, "c", 0.1);
  std::map<std::string, UserProfile> profiles = tp;
  profiles.insert(cp.begin(), cp.end());
  std::vector<UserOutcome> t;
  std::vector<UserOutcome> c;
  int i = 0;
  for (const auto& [id, p] : tp) t.push_back({id, {static_cast<double>(i++ % 5)}});
  i = 0;
  for (const auto& [id, p] : cp) c.push_back({id, {static_cast<double>(i++ % 5)}});
  const auto r = matched_lift(t, c, profiles, {{"m", MetricKind::kCount, {"e"}}}, {0.99, 2000, 1});
  EXPECT_EQ(r.pairs, 200u);
  EXPECT_EQ(r.metric("m").absolute_lift, 0.0);
  EXPECT_LE(r.metric("m").ci_low, 0.0);
  EXPECT_GE(r.metric("m").ci_high, 0.0);
}

TEST(MatchedLift, ConstantGapIsRecoveredExactly) {
  const auto tp = line_profiles(100, "t", 0.0);
  const auto cp = line_profiles(100, "c", 0.2);
  std::map<std::string, UserProfile> profiles = tp;
  profiles.insert(cp.begin(), cp.end());
  std::vector<UserOutcome> t;
  std::vector<UserOutcome> c;
  int i = 0;
  for (const auto& [id, p] : tp) t.push_back({id, {i++ * 1.5 + 0.75}});
  i = 0;
  for (const auto& [id, p] : cp) c.push_back({id, {i++ * 1.5}});
  const auto r = matched_lift(t, c, profiles, {{"m", MetricKind::kValue, {"e"}}}, {0.99, 1000, 2});
  EXPECT_NEAR(r.metric("m").absolute_lift, 0.75, 1e-12);
  EXPECT_NEAR(r.metric("m").ci_low, 0.75, 1e-12);
  EXPECT_NEAR(r.metric("m").ci_high, 0.75, 1e-12);
}

TEST(MatchedLift, KnownRateGap) {
  Rng rng(3);
  const auto tp = line_profiles(5000, "t", 0.0);
  const auto cp = line_profiles(5000, "c", 0.3);
  std::map<std::string, UserProfile> profiles = tp;
  profiles.insert(cp.begin(), cp.end());
  std::vector<UserOutcome> t;
  std::vector<UserOutcome> c;
  for (const auto& [id, p] : tp) t.push_back({id, {rng.uniform() < 0.35 ? 1.0 : 0.0}});
  for (const auto& [id, p] : cp) c.push_back({id, {rng.uniform() < 0.30 ? 1.0 : 0.0}});
  const auto r = matched_lift(t, c, profiles, {{"m", MetricKind::kBinary, {"e"}}}, {0.99, 10000, 4});
  const auto& m = r.metric("m");
  EXPECT_LE(m.ci_low, 0.05);
  EXPECT_GE(m.ci_high, 0.05);
  EXPECT_GT(m.ci_low, 0.0);
  EXPECT_GE(m.treated_rate, 0.0);
  EXPECT_LE(m.treated_rate, 1.0);
}

TEST(MatchedLift, ShortControlPoolReportsUnmatched) {
  const auto tp = line_profiles(10, "t", 0.0);
  const auto cp = line_profiles(6, "c", 0.0);
  std::map<std::string, UserProfile> profiles = tp;
  profiles.insert(cp.begin(), cp.end());
  std::vector<UserOutcome> t;
  std::vector<UserOutcome> c;
  for (const auto& [id, p] : tp) t.push_back({id, {1.0}});
  for (const auto& [id, p] : cp) c.push_back({id, {0.0}});
  const auto r = matched_lift(t, c, profiles, {{"m", MetricKind::kCount, {"e"}}}, {0.9, 100, 5});
  EXPECT_EQ(r.pairs, 6u);
  EXPECT_EQ(r.unmatched, 4u);
  EXPECT_THROW(matched_lift({}, c, profiles, {{"m", MetricKind::kCount, {"e"}}}, {0.9, 100, 5}),
               std::invalid_argument);
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("agentcrm_test_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  fs::path dir;
};

TEST_F(TempDir, SnapshotEmptyStore) {
  const auto p = (dir / "s.json").string();
  snapshot_state(PosteriorStore(), p);
  EXPECT_EQ(restore_state(p), PosteriorStore());
}

TEST_F(TempDir, SnapshotRandomStoreBitExact) {
  Rng rng(6);
  PosteriorStore store(BetaPosterior(0.7, 1.3));
  while (store.size() < 100) {
    store.set({"ctx" + std::to_string(rng.uniform_int(40)), "set" + std::to_string(rng.uniform_int(3)),
               "l" + std::to_string(rng.uniform_int(5))},
              {rng.uniform_open0() * 1e3, rng.uniform_open0() / 3.0});
  }
  const auto p = (dir / "s.json").string();
  snapshot_state(store, p);
  EXPECT_EQ(restore_state(p), store);
}

TEST_F(TempDir, TruncatedSnapshotFailsLoudly) {
  PosteriorStore store;
  store.set({"c", "s", "l"}, {2.0, 3.0});
  const auto p = (dir / "s.json").string();
  snapshot_state(store, p);
  const auto size = fs::file_size(p);
  fs::resize_file(p, size / 2);
  EXPECT_THROW(restore_state(p), std::runtime_error);
  EXPECT_THROW(restore_state((dir / "missing.json").string()), std::runtime_error);
}

TEST(Config, ValidationCatchesInconsistencies) {
  ExperimentConfig cfg = testing::funnel_experiment(50, 2, 1);
  EXPECT_NO_THROW(validate(cfg));
  cfg.treatment_fraction = 1.0;
  EXPECT_THROW(validate(cfg), std::invalid_argument);
  cfg = testing::funnel_experiment(50, 2, 1);
  cfg.did.t_delta = 13 * kMillisPerHour;
  EXPECT_THROW(validate(cfg), std::invalid_argument);
}

TEST(Config, JsonRoundTrip) {
  const ExperimentConfig cfg = testing::funnel_experiment(50, 3, 2);
  EXPECT_EQ(ExperimentConfig::from_json(cfg.to_json()).to_json(), cfg.to_json());
}

TEST(Experiment, AssignmentIndependentOfPreferences) {
  // Preferred tone x arm contingency table, chi-square at the 1% level.
  int rejections = 0;
  const int seeds = 10;
  for (int seed = 0; seed < seeds; ++seed) {
    ExperimentConfig cfg = testing::funnel_experiment(600, 1, 500 + static_cast<std::uint64_t>(seed));
    cfg.sim.preferences = {PreferenceModel::Kind::kOneHot, "tone", 2.0, 0.0};
    cfg.bootstrap_resamples = 10;
    const auto r = run_experiment(cfg);
    const auto pop = generate_population(cfg.sim, cfg.catalog.space());
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < pop.size(); ++i) index[pop[i].user_id] = i;
    const auto& tones = cfg.catalog.space().find("tone")->labels;
    std::vector<std::array<double, 2>> table(tones.size(), {0.0, 0.0});
    auto bucket = [&](const std::string& id) {
      for (std::size_t k = 0; k < tones.size(); ++k) {
        if (pop[index.at(id)].lift("tone", tones[k]) > 1.0) return k;
      }
      return tones.size();
    };
    for (const auto& id : r.treated_users) table[bucket(id)][0] += 1;
    for (const auto& id : r.control_users) table[bucket(id)][1] += 1;
    const double n = static_cast<double>(pop.size());
    double stat = 0.0;
    for (std::size_t k = 0; k < tones.size(); ++k) {
      for (int a = 0; a < 2; ++a) {
        double row = table[k][0] + table[k][1];
        double col = 0.0;
        for (const auto& t : table) col += t[a];
        const double e = row * col / n;
        stat += (table[k][a] - e) * (table[k][a] - e) / e;
      }
    }
    const boost::math::chi_squared_distribution<double> chi2(static_cast<double>(tones.size() - 1));
    rejections += boost::math::cdf(boost::math::complement(chi2, stat)) < 0.01;
  }
  EXPECT_LE(rejections, 1);
}

TEST(Experiment, NullEffectLiftCoversZero) {
  ExperimentConfig cfg = testing::funnel_experiment(400, 6, 42);
  cfg.bootstrap_resamples = 2000;
  const auto r = run_experiment(cfg);
  ASSERT_TRUE(r.report.has_value());
  for (const auto& m : r.report->metrics) {
    EXPECT_LE(m.ci_low, 0.0) << m.name;
    EXPECT_GE(m.ci_high, 0.0) << m.name;
  }
}

TEST(Experiment, StrongUniformEffectShowsConversionLift) {
  ExperimentConfig cfg = testing::funnel_experiment(600, 10, 43);
  cfg.sim.preferences = {PreferenceModel::Kind::kUniform, "tone", 3.0, 0.0};
  cfg.bootstrap_resamples = 2000;
  const auto r = run_experiment(cfg);
  EXPECT_GT(r.report->metric("conversion").ci_low, 0.0);
}

TEST(Experiment, DeterministicLogsAndResume) {
  ExperimentConfig cfg = testing::funnel_experiment(120, 6, 44);
  cfg.sim.preferences = {PreferenceModel::Kind::kOneHot, "tone", 2.0, 0.0};
  cfg.bootstrap_resamples = 200;
  const auto a = run_experiment(cfg);
  const auto b = run_experiment(cfg);
  EXPECT_EQ(a.decision_log, b.decision_log);
  EXPECT_EQ(a.estimate_log, b.estimate_log);
  EXPECT_EQ(a.report->to_json(), b.report->to_json());

  RunOptions first;
  first.stop_after = 3;
  const auto half = run_experiment(cfg, first);
  EXPECT_FALSE(half.report.has_value());
  RunOptions rest;
  rest.resume = ExperimentState::from_json(nlohmann::json::parse(half.state.to_json().dump()));
  const auto resumed = run_experiment(cfg, rest);
  EXPECT_EQ(resumed.state.store, a.state.store);
  EXPECT_EQ(resumed.report->to_json(), a.report->to_json());
}

TEST(Experiment, ResumeWithWrongSeedRejected) {
  ExperimentConfig cfg = testing::funnel_experiment(60, 4, 45);
  cfg.bootstrap_resamples = 10;
  RunOptions first;
  first.stop_after = 2;
  auto state = run_experiment(cfg, first).state;
  cfg.sim.seed = 46;
  RunOptions rest;
  rest.resume = state;
  EXPECT_THROW(run_experiment(cfg, rest), std::invalid_argument);
}

TEST(Experiment, SkipsSendWhenNothingIsEligible) {
  ExperimentConfig cfg = testing::funnel_experiment(60, 2, 47);
  std::vector<MessageTemplate> gated = cfg.catalog.templates();
  for (auto& t : gated) t.required_tags = {"vip"};
  cfg.catalog = MessageCatalog(gated, cfg.catalog.space());
  cfg.bootstrap_resamples = 10;
  const auto r = run_experiment(cfg);
  EXPECT_TRUE(r.estimate_log.empty());
  EXPECT_EQ(r.state.store.size(), 0u);
  ASSERT_FALSE(r.decision_log.empty());
  EXPECT_NE(r.decision_log.front().find("skip"), std::string::npos);
}

TEST(Experiment, GlobalAndTierContexts) {
  for (ContextMode mode : {ContextMode::kGlobal, ContextMode::kActivityTier}) {
    ExperimentConfig cfg = testing::funnel_experiment(80, 3, 48);
    cfg.context = mode;
    cfg.bootstrap_resamples = 10;
    const auto r = run_experiment(cfg);
    std::set<std::string> contexts;
    for (const auto& [key, p] : r.state.store.entries()) contexts.insert(key.context);
    if (mode == ContextMode::kGlobal) {
      EXPECT_EQ(contexts, std::set<std::string>{"global"});
    } else {
      EXPECT_EQ(contexts, (std::set<std::string>{"tier:high", "tier:low"}));
    }
  }
}

TEST_F(TempDir, WriteOutputs) {
  ExperimentConfig cfg = testing::funnel_experiment(60, 2, 49);
  cfg.bootstrap_resamples = 50;
  const auto r = run_experiment(cfg);
  write_outputs(r, dir.string());
  for (const char* f : {"decisions.jsonl", "estimates.jsonl", "weights.json", "state.json", "posteriors.json",
                        "lift_report.json", "lift_report.txt"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_EQ(restore_state((dir / "posteriors.json").string()), r.state.store);
  EXPECT_EQ(load_experiment_state((dir / "state.json").string()).to_json(), r.state.to_json());
}

}  // namespace
}  // namespace agentcrm
