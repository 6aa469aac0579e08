// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace agentcrm {

// One operator-curated attribute dimension of a message, e.g. tone-of-voice.
struct ActionSet {
  std::string name;
  std::vector<std::string> labels;

  friend bool operator==(const ActionSet&, const ActionSet&) = default;
};

class ActionSpace {
 public:
  ActionSpace() = default;
  // Throws std::invalid_argument for duplicate set names, empty sets or
  // duplicate labels within a set.
  explicit ActionSpace(std::vector<ActionSet> sets);

  const std::vector<ActionSet>& sets() const { return sets_; }
  std::size_t size() const { return sets_.size(); }
  bool empty() const { return sets_.empty(); }

  const ActionSet* find(const std::string& set_name) const;
  bool has_label(const std::string& set_name, const std::string& label) const;

  nlohmann::json to_json() const;
  static ActionSpace from_json(const nlohmann::json& doc);

  friend bool operator==(const ActionSpace&, const ActionSpace&) = default;

 private:
  std::vector<ActionSet> sets_;
};

// One chosen label per action set.
struct ActionCombo {
  std::map<std::string, std::string> choices;

  const std::string& at(const std::string& set_name) const { return choices.at(set_name); }

  nlohmann::json to_json() const { return choices; }
  static ActionCombo from_json(const nlohmann::json& doc) {
    return {doc.get<std::map<std::string, std::string>>()};
  }

  friend bool operator==(const ActionCombo&, const ActionCombo&) = default;
};

// Throws std::invalid_argument unless the combo names exactly the space's
// sets with a valid label for each.
void validate(const ActionCombo& combo, const ActionSpace& space);

}  // namespace agentcrm
