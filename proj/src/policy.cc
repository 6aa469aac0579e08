// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "agentcrm/policy.h"

#include <cmath>
#include <stdexcept>

namespace agentcrm {

using nlohmann::json;

BetaPosterior::BetaPosterior(double a, double b) : alpha(a), beta(b) {
  if (!(std::isfinite(a) && std::isfinite(b) && a > 0.0 && b > 0.0)) {
    throw std::invalid_argument("Beta parameters must be positive and finite");
  }
}

std::optional<BetaPosterior> PosteriorStore::find(const PosteriorKey& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

BetaPosterior PosteriorStore::resolve(const PosteriorKey& key, const PriorImputer& imputer) const {
  if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  if (imputer) {
    if (auto prior = imputer(key)) return *prior;
  }
  return default_prior_;
}

json PosteriorStore::to_json() const {
  json entries = json::array();
  for (const auto& [key, post] : entries_) {
    entries.push_back({{"context", key.context},
                       {"set", key.action_set},
                       {"label", key.label},
                       {"alpha", post.alpha},
                       {"beta", post.beta}});
  }
  return {{"format", kFormatTag},
          {"version", kFormatVersion},
          {"default_prior", {{"alpha", default_prior_.alpha}, {"beta", default_prior_.beta}}},
          {"entries", std::move(entries)}};
}

PosteriorStore PosteriorStore::from_json(const json& doc) {
  try {
    if (!doc.is_object() || doc.value("format", "") != kFormatTag) {
      throw std::runtime_error("not a posterior store snapshot");
    }
    const int version = doc.at("version").get<int>();
    if (version != kFormatVersion) {
      throw std::runtime_error("unsupported snapshot version " + std::to_string(version));
    }
    const json& prior = doc.at("default_prior");
    PosteriorStore store(
        BetaPosterior(prior.at("alpha").get<double>(), prior.at("beta").get<double>()));
    for (const auto& e : doc.at("entries")) {
      PosteriorKey key{e.at("context").get<std::string>(), e.at("set").get<std::string>(),
                       e.at("label").get<std::string>()};
      if (!store.entries_
               .emplace(std::move(key),
                        BetaPosterior(e.at("alpha").get<double>(), e.at("beta").get<double>()))
               .second) {
        throw std::runtime_error("duplicate snapshot entry");
      }
    }
    return store;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed posterior snapshot: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("malformed posterior snapshot: ") + e.what());
  }
}

std::size_t argmax_first(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::vector<double> sample_scores(const PosteriorStore& store, const std::string& context,
                                  const ActionSet& set, Rng& rng, const PriorImputer& imputer) {
  std::vector<double> draws;
  draws.reserve(set.labels.size());
  for (const auto& label : set.labels) {
    const BetaPosterior p = store.resolve({context, set.name, label}, imputer);
    draws.push_back(rng.beta(p.alpha, p.beta));
  }
  return draws;
}

ActionCombo thompson_select(const PosteriorStore& store, const std::string& context,
                            const ActionSpace& space, Rng& rng, const PriorImputer& imputer) {
  if (space.empty()) throw std::invalid_argument("empty action space");
  ActionCombo combo;
  for (const auto& set : space.sets()) {
    const auto draws = sample_scores(store, context, set, rng, imputer);
    combo.choices[set.name] = set.labels[argmax_first(draws)];
  }
  return combo;
}

void update_posterior(PosteriorStore& store, const ActionSpace& space, const std::string& context,
                      const ActionCombo& combo, int reward_bit, const PriorImputer& imputer) {
  validate(combo, space);
  if (reward_bit != 0 && reward_bit != 1) throw std::invalid_argument("reward must be 0 or 1");
  for (const auto& [set, label] : combo.choices) {
    const PosteriorKey key{context, set, label};
    BetaPosterior p = store.resolve(key, imputer);
    p.alpha += reward_bit;
    p.beta += 1 - reward_bit;
    store.set(key, p);
  }
}

BetaPosterior mean_posterior(std::span<const BetaPosterior> posteriors,
                             const BetaPosterior& fallback) {
  if (posteriors.empty()) return fallback;
  double a = 0.0;
  double b = 0.0;
  for (const auto& p : posteriors) {
    a += p.alpha;
    b += p.beta;
  }
  const double n = static_cast<double>(posteriors.size());
  return BetaPosterior(a / n, b / n);
}

BetaPosterior empirical_bayes_prior(const UserProfile& target,
                                    std::span<const NeighbourPosterior> neighbours, std::size_t k,
                                    const BetaPosterior& fallback) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  std::vector<UserProfile> with_data;
  std::map<std::string, BetaPosterior> posterior_of;
  for (const auto& n : neighbours) {
    if (!n.posterior || n.profile.user_id == target.user_id) continue;
    with_data.push_back(n.profile);
    posterior_of.emplace(n.profile.user_id, *n.posterior);
  }
  if (with_data.empty()) return fallback;

  const auto nearest = ControlPool(with_data).select(target, k);
  std::vector<BetaPosterior> chosen;
  chosen.reserve(nearest.user_ids.size());
  for (const auto& id : nearest.user_ids) chosen.push_back(posterior_of.at(id));
  return mean_posterior(chosen, fallback);
}

}  // namespace agentcrm
