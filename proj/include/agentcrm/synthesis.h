// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "agentcrm/action_space.h"
#include "json.hpp"

namespace agentcrm {

// An operator-authored message variant annotated with the action labels it
// expresses. Sets it does not annotate are neutral when matching.
struct MessageTemplate {
  std::string message_id;
  std::map<std::string, std::string> attributes;
  // The user must carry every one of these segment tags.
  std::vector<std::string> required_tags;
  std::string channel;
  std::string body_ref;

  friend bool operator==(const MessageTemplate&, const MessageTemplate&) = default;
};

class MessageCatalog {
 public:
  MessageCatalog() = default;
  // Throws std::invalid_argument on duplicate ids or attributes outside space.
  MessageCatalog(std::vector<MessageTemplate> templates, ActionSpace space);

  const std::vector<MessageTemplate>& templates() const { return templates_; }
  const ActionSpace& space() const { return space_; }

  // Reads {"action_space": [...], "templates": [...]}.
  static MessageCatalog from_json(const nlohmann::json& doc);
  static MessageCatalog load(const std::string& path);
  nlohmann::json to_json() const;

 private:
  std::vector<MessageTemplate> templates_;
  ActionSpace space_;
};

class NoEligibleMessage : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Templates whose required tags are all in user_tags, catalogue order kept.
std::vector<MessageTemplate> eligible_templates(const MessageCatalog& catalog,
                                                const std::set<std::string>& user_tags);

// Number of annotated attributes that agree with the combo.
int match_score(const ActionCombo& combo, const MessageTemplate& tmpl);

// Highest-scoring template, ties to the lowest message_id. Throws
// NoEligibleMessage for an empty list.
const MessageTemplate& match_message(const ActionCombo& combo,
                                     std::span<const MessageTemplate> eligible);

// The combo actually expressed by a sent template: its annotations override
// the sampled choices, unannotated sets keep the sampled label.
ActionCombo delivered_combo(const ActionCombo& sampled, const MessageTemplate& sent);

}  // namespace agentcrm
