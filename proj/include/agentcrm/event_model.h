// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace agentcrm {

// Instants are integer epoch milliseconds; durations are millisecond counts.
using Timestamp = std::int64_t;
using Duration = std::int64_t;

inline constexpr Duration kMillisPerHour = 3'600'000;
inline constexpr Duration kMillisPerDay = 24 * kMillisPerHour;

// Half-open time interval [begin, end).
struct Interval {
  Timestamp begin = 0;
  Timestamp end = 0;

  Interval() = default;
  // Throws std::invalid_argument if begin > end.
  Interval(Timestamp begin, Timestamp end);

  bool contains(Timestamp t) const { return begin <= t && t < end; }
  Duration length() const { return end - begin; }
  bool empty() const { return begin == end; }

  friend bool operator==(const Interval&, const Interval&) = default;
};

struct EventRecord {
  std::string user_id;
  Timestamp timestamp = 0;
  std::string event_name;
  // Absent means "count once"; see weight_value().
  std::optional<double> value;

  double weight_value() const { return value.value_or(1.0); }

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

// Throws std::invalid_argument when a record breaks the EventRecord invariants.
void validate(const EventRecord& record);

// Time-ordered events of a single user. Immutable once built.
class EventStream {
 public:
  EventStream() = default;
  explicit EventStream(std::string user_id) : user_id_(std::move(user_id)) {}
  // Sorts records by timestamp (stable) and checks they all belong to user_id.
  EventStream(std::string user_id, std::vector<EventRecord> records);

  const std::string& user_id() const { return user_id_; }
  const std::vector<EventRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  // Records with window.begin <= timestamp < window.end, order preserved.
  EventStream slice(const Interval& window) const;
  // Same records as slice() without copying.
  std::span<const EventRecord> view(const Interval& window) const;

  friend bool operator==(const EventStream&, const EventStream&) = default;

 private:
  std::string user_id_;
  std::vector<EventRecord> records_;
};

// Convenience wrapper matching the operation name used across the docs.
inline EventStream slice_window(const EventStream& stream, const Interval& window) {
  return stream.slice(window);
}

struct GoalSpec {
  std::set<std::string> goal_event_names;
  // Look-ahead used when deciding whether an event was followed by a goal.
  Duration attribution_window = kMillisPerDay;

  bool is_goal(const std::string& event_name) const {
    return goal_event_names.contains(event_name);
  }
  friend bool operator==(const GoalSpec&, const GoalSpec&) = default;
};

// Throws std::invalid_argument for an empty goal set or non-positive window.
void validate(const GoalSpec& goal);

// ---------------------------------------------------------------------------
// JSON-lines event log
//
// One object per line: {"user_id": str, "ts": int ms, "event": str,
// "value": number (optional)}. Blank lines are ignored.

struct IngestError {
  std::size_t line_number = 0;  // 1-based
  std::string message;
};

struct IngestReport {
  std::size_t lines_read = 0;  // non-blank lines
  std::size_t records_accepted = 0;
  std::vector<IngestError> errors;
};

struct IngestResult {
  std::map<std::string, EventStream> streams;
  IngestReport report;
};

// Thrown when more than half of the non-blank lines fail validation.
class IngestFailure : public std::runtime_error {
 public:
  IngestFailure(const std::string& what, IngestReport report)
      : std::runtime_error(what), report_(std::move(report)) {}
  const IngestReport& report() const { return report_; }

 private:
  IngestReport report_;
};

EventRecord parse_event_line(const std::string& line);
std::string format_event_line(const EventRecord& record);

IngestResult ingest_events(std::istream& source);
// Throws std::runtime_error if the file cannot be opened.
IngestResult ingest_events_file(const std::string& path);

// Writes every record of every stream, one line each, streams in map order.
void write_events(std::ostream& sink, const std::map<std::string, EventStream>& streams);
void write_events(std::ostream& sink, const EventStream& stream);

}  // namespace agentcrm
