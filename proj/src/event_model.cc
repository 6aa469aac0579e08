// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "agentcrm/event_model.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"

namespace agentcrm {

using nlohmann::json;

Interval::Interval(Timestamp b, Timestamp e) : begin(b), end(e) {
  if (b > e) {
    throw std::invalid_argument("interval begin " + std::to_string(b) + " is after end " +
                                std::to_string(e));
  }
}

void validate(const EventRecord& record) {
  if (record.timestamp < 0) throw std::invalid_argument("timestamp must be non-negative");
  if (record.event_name.empty()) throw std::invalid_argument("event name must be non-empty");
  if (record.value && (!std::isfinite(*record.value) || *record.value < 0.0)) {
    throw std::invalid_argument("value must be finite and non-negative");
  }
}

void validate(const GoalSpec& goal) {
  if (goal.goal_event_names.empty()) {
    throw std::invalid_argument("goal spec needs at least one goal event");
  }
  if (goal.attribution_window <= 0) {
    throw std::invalid_argument("attribution window must be positive");
  }
}

EventStream::EventStream(std::string user_id, std::vector<EventRecord> records)
    : user_id_(std::move(user_id)), records_(std::move(records)) {
  for (const auto& r : records_) {
    if (r.user_id != user_id_) {
      throw std::invalid_argument("record for user '" + r.user_id + "' in stream of '" +
                                  user_id_ + "'");
    }
  }
  std::stable_sort(records_.begin(), records_.end(),
                   [](const EventRecord& a, const EventRecord& b) {
                     return a.timestamp < b.timestamp;
                   });
}

std::span<const EventRecord> EventStream::view(const Interval& window) const {
  auto by_time = [](const EventRecord& r, Timestamp t) { return r.timestamp < t; };
  auto first = std::lower_bound(records_.begin(), records_.end(), window.begin, by_time);
  auto last = std::lower_bound(first, records_.end(), window.end, by_time);
  return {first, last};
}

EventStream EventStream::slice(const Interval& window) const {
  const auto records = view(window);
  EventStream out(user_id_);
  out.records_.assign(records.begin(), records.end());
  return out;
}

EventRecord parse_event_line(const std::string& line) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument("line is not a JSON object");

  auto require = [&](const char* key) -> const json& {
    auto it = doc.find(key);
    if (it == doc.end()) throw std::invalid_argument(std::string("missing field '") + key + "'");
    return *it;
  };

  EventRecord r;
  const json& uid = require("user_id");
  if (!uid.is_string()) throw std::invalid_argument("'user_id' must be a string");
  r.user_id = uid.get<std::string>();

  const json& ts = require("ts");
  if (!ts.is_number_integer()) throw std::invalid_argument("'ts' must be an integer");
  r.timestamp = ts.get<std::int64_t>();

  const json& ev = require("event");
  if (!ev.is_string()) throw std::invalid_argument("'event' must be a string");
  r.event_name = ev.get<std::string>();

  if (auto it = doc.find("value"); it != doc.end()) {
    if (!it->is_number()) throw std::invalid_argument("'value' must be a number");
    r.value = it->get<double>();
  }
  validate(r);
  return r;
}

std::string format_event_line(const EventRecord& record) {
  json doc = {{"user_id", record.user_id}, {"ts", record.timestamp}, {"event", record.event_name}};
  if (record.value) doc["value"] = *record.value;
  return doc.dump();
}

IngestResult ingest_events(std::istream& source) {
  IngestResult result;
  std::map<std::string, std::vector<EventRecord>> by_user;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(source, line)) {
    ++line_number;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    ++result.report.lines_read;
    try {
      EventRecord r = parse_event_line(line);
      by_user[r.user_id].push_back(std::move(r));
      ++result.report.records_accepted;
    } catch (const std::invalid_argument& e) {
      result.report.errors.push_back({line_number, e.what()});
    }
  }
  if (source.bad()) throw std::runtime_error("I/O error while reading event log");

  if (2 * result.report.errors.size() > result.report.lines_read) {
    throw IngestFailure(std::to_string(result.report.errors.size()) + " of " +
                            std::to_string(result.report.lines_read) +
                            " lines failed validation",
                        std::move(result.report));
  }
  for (auto& [user, records] : by_user) {
    result.streams.emplace(user, EventStream(user, std::move(records)));
  }
  return result;
}

IngestResult ingest_events_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open event log '" + path + "'");
  return ingest_events(in);
}

void write_events(std::ostream& sink, const EventStream& stream) {
  for (const auto& r : stream.records()) sink << format_event_line(r) << '\n';
}

void write_events(std::ostream& sink, const std::map<std::string, EventStream>& streams) {
  for (const auto& [user, stream] : streams) write_events(sink, stream);
}

}  // namespace agentcrm
