// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agentcrm/action_space.h"
#include "agentcrm/ite.h"
#include "agentcrm/rng.h"
#include "json.hpp"

namespace agentcrm {

struct BetaPosterior {
  double alpha = 1.0;
  double beta = 1.0;

  BetaPosterior() = default;
  // Throws std::invalid_argument unless both parameters are positive and finite.
  BetaPosterior(double alpha, double beta);

  double mean() const { return alpha / (alpha + beta); }

  friend bool operator==(const BetaPosterior&, const BetaPosterior&) = default;
};

struct PosteriorKey {
  std::string context;
  std::string action_set;
  std::string label;

  friend auto operator<=>(const PosteriorKey&, const PosteriorKey&) = default;
};

// Supplies a prior for an entry with no data yet, or nullopt to fall back to
// the store's default prior.
using PriorImputer = std::function<std::optional<BetaPosterior>(const PosteriorKey&)>;

// Per (context, action set, label) Beta posteriors over the binarised
// treatment effect.
class PosteriorStore {
 public:
  static constexpr const char* kFormatTag = "agentcrm.posterior_store";
  static constexpr int kFormatVersion = 1;

  PosteriorStore() = default;
  explicit PosteriorStore(BetaPosterior default_prior) : default_prior_(default_prior) {}

  const BetaPosterior& default_prior() const { return default_prior_; }
  const std::map<PosteriorKey, BetaPosterior>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::optional<BetaPosterior> find(const PosteriorKey& key) const;

  // Stored entry, else the imputed prior, else the default prior.
  BetaPosterior resolve(const PosteriorKey& key, const PriorImputer& imputer = {}) const;

  void set(const PosteriorKey& key, const BetaPosterior& posterior) { entries_[key] = posterior; }

  nlohmann::json to_json() const;
  // Throws std::runtime_error on a wrong format tag or version, or on any
  // malformed entry.
  static PosteriorStore from_json(const nlohmann::json& doc);

  friend bool operator==(const PosteriorStore&, const PosteriorStore&) = default;

 private:
  BetaPosterior default_prior_{1.0, 1.0};
  std::map<PosteriorKey, BetaPosterior> entries_;
};

// Index of the largest value; the first one wins ties.
std::size_t argmax_first(std::span<const double> values);

// One posterior draw per label of `set`, in declared label order.
std::vector<double> sample_scores(const PosteriorStore& store, const std::string& context,
                                  const ActionSet& set, Rng& rng,
                                  const PriorImputer& imputer = {});

// Thompson sampling over a modular action space: for every action set, draw
// one sample per label and keep the label with the largest draw. Sets are
// visited in declared order, so the combo is a function of the rng state.
ActionCombo thompson_select(const PosteriorStore& store, const std::string& context,
                            const ActionSpace& space, Rng& rng,
                            const PriorImputer& imputer = {});

// Conjugate Beta-Bernoulli update of every (set, label) in the combo with the
// combo's reward. Entries without data start from store.resolve(key, imputer).
// Throws std::invalid_argument for a combo inconsistent with the space or a
// reward other than 0/1.
void update_posterior(PosteriorStore& store, const ActionSpace& space, const std::string& context,
                      const ActionCombo& combo, int reward_bit, const PriorImputer& imputer = {});

// Component-wise mean of the given posteriors; fallback when empty.
BetaPosterior mean_posterior(std::span<const BetaPosterior> posteriors,
                             const BetaPosterior& fallback = {});

struct NeighbourPosterior {
  UserProfile profile;
  // The neighbour's posterior for the entry in question, if it has data.
  std::optional<BetaPosterior> posterior;
};

// Empirical-Bayes prior: mean of the posteriors of the k neighbours closest
// to target among those that have data; fallback when none does.
BetaPosterior empirical_bayes_prior(const UserProfile& target,
                                    std::span<const NeighbourPosterior> neighbours, std::size_t k,
                                    const BetaPosterior& fallback = {});

}  // namespace agentcrm
