// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "agentcrm/action_space.h"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace agentcrm {

using nlohmann::json;

ActionSpace::ActionSpace(std::vector<ActionSet> sets) : sets_(std::move(sets)) {
  std::set<std::string> names;
  for (const auto& s : sets_) {
    if (s.name.empty()) throw std::invalid_argument("action set name must be non-empty");
    if (!names.insert(s.name).second) {
      throw std::invalid_argument("duplicate action set '" + s.name + "'");
    }
    if (s.labels.empty()) throw std::invalid_argument("action set '" + s.name + "' is empty");
    std::set<std::string> labels(s.labels.begin(), s.labels.end());
    if (labels.size() != s.labels.size()) {
      throw std::invalid_argument("duplicate label in action set '" + s.name + "'");
    }
  }
}

const ActionSet* ActionSpace::find(const std::string& set_name) const {
  auto it = std::find_if(sets_.begin(), sets_.end(),
                         [&](const ActionSet& s) { return s.name == set_name; });
  return it == sets_.end() ? nullptr : &*it;
}

bool ActionSpace::has_label(const std::string& set_name, const std::string& label) const {
  const ActionSet* s = find(set_name);
  return s != nullptr && std::find(s->labels.begin(), s->labels.end(), label) != s->labels.end();
}

json ActionSpace::to_json() const {
  json out = json::array();
  for (const auto& s : sets_) out.push_back({{"name", s.name}, {"labels", s.labels}});
  return out;
}

ActionSpace ActionSpace::from_json(const json& doc) {
  std::vector<ActionSet> sets;
  for (const auto& s : doc) {
    sets.push_back({s.at("name").get<std::string>(),
                    s.at("labels").get<std::vector<std::string>>()});
  }
  return ActionSpace(std::move(sets));
}

void validate(const ActionCombo& combo, const ActionSpace& space) {
  if (combo.choices.size() != space.size()) {
    throw std::invalid_argument("combo has " + std::to_string(combo.choices.size()) +
                                " choices for " + std::to_string(space.size()) + " action sets");
  }
  for (const auto& [set, label] : combo.choices) {
    if (space.find(set) == nullptr) throw std::invalid_argument("unknown action set '" + set + "'");
    if (!space.has_label(set, label)) {
      throw std::invalid_argument("unknown label '" + label + "' in action set '" + set + "'");
    }
  }
}

}  // namespace agentcrm
