// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace agentcrm {

// Seeded random source that can be split into independent named children.
//
// Every random draw in the library comes from an Rng derived from the
// experiment seed through split() calls, so the result of a draw depends only
// on the path of labels that produced it and never on evaluation order.
// Children are derived with splitmix64 over (parent seed, label).
class Rng {
 public:
  using Engine = std::mt19937_64;

  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  Rng split(std::uint64_t label) const;
  Rng split(std::string_view label) const;
  template <typename... Labels>
  Rng split(std::uint64_t first, Labels... rest) const {
    return split(first).split(rest...);
  }
  template <typename... Labels>
  Rng split(std::string_view first, Labels... rest) const {
    return split(first).split(rest...);
  }

  Engine& engine() { return engine_; }

  // Uniform double in [0, 1).
  double uniform();
  // Uniform double in (0, 1]; safe as input to log().
  double uniform_open0();
  double normal(double mean = 0.0, double stddev = 1.0);
  double beta(double alpha, double beta);
  double exponential(double rate);
  std::uint64_t uniform_int(std::uint64_t n);  // [0, n)

 private:
  std::uint64_t seed_;
  Engine engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace agentcrm
