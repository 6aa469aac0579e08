// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "agentcrm/event_model.h"
#include "agentcrm/rng.h"

namespace agentcrm {
namespace {

EventRecord rec(Timestamp t, const std::string& name = "open", const std::string& user = "u1") {
  return {user, t, name, std::nullopt};
}

EventStream random_stream(Rng& rng, std::size_t n) {
  std::vector<EventRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    records.push_back(rec(static_cast<Timestamp>(rng.uniform_int(1000)),
                          "e" + std::to_string(rng.uniform_int(5))));
  }
  return EventStream("u1", records);
}

TEST(Interval, RejectsReversedBounds) {
  EXPECT_THROW(Interval(5, 4), std::invalid_argument);
  EXPECT_TRUE(Interval(4, 4).empty());
}

TEST(EventRecord, Validation) {
  EXPECT_NO_THROW(validate(rec(0)));
  EXPECT_THROW(validate(rec(-1)), std::invalid_argument);
  EXPECT_THROW(validate(rec(0, "")), std::invalid_argument);
  EventRecord negative = rec(0);
  negative.value = -1.0;
  EXPECT_THROW(validate(negative), std::invalid_argument);
}

TEST(EventStream, SortsStablyAndChecksUser) {
  const EventStream s("u1", {rec(3, "a"), rec(1, "b"), rec(3, "c"), rec(2, "d")});
  std::vector<std::string> names;
  for (const auto& r : s.records()) names.push_back(r.event_name);
  EXPECT_EQ(names, (std::vector<std::string>{"b", "d", "a", "c"}));
  EXPECT_THROW(EventStream("u1", {rec(1, "a", "u2")}), std::invalid_argument);
}

TEST(SliceWindow, EmptyInterval) {
  const EventStream s("u1", {rec(1), rec(2), rec(3)});
  EXPECT_TRUE(slice_window(s, Interval(2, 2)).empty());
}

TEST(SliceWindow, HalfOpenBoundaries) {
  const EventStream s("u1", {rec(1), rec(2), rec(3)});
  const EventStream got = slice_window(s, Interval(2, 3));
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got.records()[0].timestamp, 2);
}

TEST(SliceWindow, MatchesBruteForceFilter) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const EventStream s = random_stream(rng, 100);
    const auto a = static_cast<Timestamp>(rng.uniform_int(1000));
    const auto b = a + static_cast<Timestamp>(rng.uniform_int(1000 - static_cast<std::uint64_t>(a) + 1));
    std::vector<EventRecord> want;
    for (const auto& r : s.records()) {
      if (a <= r.timestamp && r.timestamp < b) want.push_back(r);
    }
    EXPECT_EQ(slice_window(s, Interval(a, b)).records(), want);
    const auto view = s.view(Interval(a, b));
    EXPECT_TRUE(std::equal(view.begin(), view.end(), want.begin(), want.end()));
  }
}

TEST(SliceWindow, AdjacentWindowsPartition) {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const EventStream s = random_stream(rng, 100);
    std::vector<Timestamp> cut = {static_cast<Timestamp>(rng.uniform_int(1001)),
                                  static_cast<Timestamp>(rng.uniform_int(1001)),
                                  static_cast<Timestamp>(rng.uniform_int(1001))};
    std::sort(cut.begin(), cut.end());
    auto joined = slice_window(s, Interval(cut[0], cut[1])).records();
    const auto right = slice_window(s, Interval(cut[1], cut[2])).records();
    joined.insert(joined.end(), right.begin(), right.end());
    EXPECT_EQ(joined, slice_window(s, Interval(cut[0], cut[2])).records());
  }
}

TEST(Ingest, EmptyInput) {
  std::istringstream in("");
  const IngestResult r = ingest_events(in);
  EXPECT_TRUE(r.streams.empty());
  EXPECT_TRUE(r.report.errors.empty());
}

TEST(Ingest, SortsOutOfOrderLines) {
  std::istringstream in(
      R"({"user_id":"u1","ts":30,"event":"c"})"
      "\n"
      R"({"user_id":"u1","ts":10,"event":"a"})"
      "\n"
      R"({"user_id":"u1","ts":20,"event":"b"})"
      "\n");
  const IngestResult r = ingest_events(in);
  ASSERT_EQ(r.streams.size(), 1u);
  const auto& recs = r.streams.at("u1").records();
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0].timestamp, 10);
  EXPECT_EQ(recs[1].timestamp, 20);
  EXPECT_EQ(recs[2].timestamp, 30);
}

TEST(Ingest, ReportsMalformedLine) {
  std::istringstream in(
      R"({"user_id":"u1","ts":10,"event":"a"})"
      "\n"
      R"({"user_id":"u1","event":"b"})"
      "\n"
      R"({"user_id":"u2","ts":5,"event":"a","value":2.5})"
      "\n");
  const IngestResult r = ingest_events(in);
  EXPECT_EQ(r.report.records_accepted, 2u);
  ASSERT_EQ(r.report.errors.size(), 1u);
  EXPECT_EQ(r.report.errors[0].line_number, 2u);
  EXPECT_EQ(r.streams.at("u2").records()[0].value, 2.5);
}

TEST(Ingest, MostlyBadInputFails) {
  std::istringstream in("not json\n{\"user_id\":\"u\"}\n{\"user_id\":\"u\",\"ts\":1,\"event\":\"a\"}\n");
  EXPECT_THROW(ingest_events(in), IngestFailure);
}

TEST(Ingest, MissingFileIsAnIoError) {
  EXPECT_THROW(ingest_events_file("/nonexistent/events.jsonl"), std::runtime_error);
}

TEST(Ingest, RoundTripIsAFixedPoint) {
  Rng rng(13);
  std::map<std::string, EventStream> streams;
  for (int u = 0; u < 5; ++u) {
    const std::string id = "user-" + std::to_string(u);
    std::vector<EventRecord> recs;
    for (int i = 0; i < 50; ++i) {
      EventRecord r{id, static_cast<Timestamp>(rng.uniform_int(1'000'000'000'000)),
                    "ev\"" + std::to_string(rng.uniform_int(4)), std::nullopt};
      if (rng.uniform() < 0.5) r.value = rng.uniform() * 1e6 / 7.0;
      recs.push_back(r);
    }
    streams.emplace(id, EventStream(id, recs));
  }
  std::stringstream first;
  write_events(first, streams);
  const IngestResult again = ingest_events(first);
  EXPECT_EQ(again.streams, streams);
  std::stringstream second;
  write_events(second, again.streams);
  EXPECT_EQ(first.str(), second.str());
}

TEST(GoalSpec, Validation) {
  EXPECT_THROW(validate(GoalSpec{{}, kMillisPerHour}), std::invalid_argument);
  EXPECT_THROW(validate(GoalSpec{{"buy"}, 0}), std::invalid_argument);
  EXPECT_NO_THROW(validate(GoalSpec{{"buy"}, kMillisPerHour}));
}

}  // namespace
}  // namespace agentcrm
