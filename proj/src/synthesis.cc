// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "agentcrm/synthesis.h"

#include <algorithm>
#include <fstream>

namespace agentcrm {

using nlohmann::json;

MessageCatalog::MessageCatalog(std::vector<MessageTemplate> templates, ActionSpace space)
    : templates_(std::move(templates)), space_(std::move(space)) {
  std::set<std::string> ids;
  for (const auto& t : templates_) {
    if (t.message_id.empty()) throw std::invalid_argument("template without message_id");
    if (!ids.insert(t.message_id).second) {
      throw std::invalid_argument("duplicate message_id '" + t.message_id + "'");
    }
    for (const auto& [set, label] : t.attributes) {
      if (!space_.has_label(set, label)) {
        throw std::invalid_argument("template '" + t.message_id + "' uses unknown attribute " +
                                    set + "=" + label);
      }
    }
  }
}

MessageCatalog MessageCatalog::from_json(const json& doc) {
  ActionSpace space = ActionSpace::from_json(doc.at("action_space"));
  std::vector<MessageTemplate> templates;
  for (const auto& t : doc.at("templates")) {
    MessageTemplate m;
    m.message_id = t.at("id").get<std::string>();
    m.attributes = t.value("attributes", std::map<std::string, std::string>{});
    m.required_tags = t.value("required_tags", std::vector<std::string>{});
    m.channel = t.value("channel", "");
    m.body_ref = t.value("body_ref", "");
    templates.push_back(std::move(m));
  }
  return MessageCatalog(std::move(templates), std::move(space));
}

MessageCatalog MessageCatalog::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open catalogue '" + path + "'");
  return from_json(json::parse(in));
}

json MessageCatalog::to_json() const {
  json templates = json::array();
  for (const auto& t : templates_) {
    templates.push_back({{"id", t.message_id},
                         {"attributes", t.attributes},
                         {"required_tags", t.required_tags},
                         {"channel", t.channel},
                         {"body_ref", t.body_ref}});
  }
  return {{"action_space", space_.to_json()}, {"templates", std::move(templates)}};
}

std::vector<MessageTemplate> eligible_templates(const MessageCatalog& catalog,
                                                const std::set<std::string>& user_tags) {
  std::vector<MessageTemplate> out;
  for (const auto& t : catalog.templates()) {
    const bool ok = std::all_of(t.required_tags.begin(), t.required_tags.end(),
                                [&](const std::string& tag) { return user_tags.contains(tag); });
    if (ok) out.push_back(t);
  }
  return out;
}

int match_score(const ActionCombo& combo, const MessageTemplate& tmpl) {
  int score = 0;
  for (const auto& [set, label] : tmpl.attributes) {
    auto it = combo.choices.find(set);
    if (it != combo.choices.end() && it->second == label) ++score;
  }
  return score;
}

const MessageTemplate& match_message(const ActionCombo& combo,
                                     std::span<const MessageTemplate> eligible) {
  if (eligible.empty()) throw NoEligibleMessage("no eligible message template");
  const MessageTemplate* best = &eligible.front();
  int best_score = match_score(combo, *best);
  for (const auto& t : eligible.subspan(1)) {
    const int s = match_score(combo, t);
    if (s > best_score || (s == best_score && t.message_id < best->message_id)) {
      best = &t;
      best_score = s;
    }
  }
  return *best;
}

ActionCombo delivered_combo(const ActionCombo& sampled, const MessageTemplate& sent) {
  ActionCombo out = sampled;
  for (const auto& [set, label] : sent.attributes) out.choices[set] = label;
  return out;
}

}  // namespace agentcrm
