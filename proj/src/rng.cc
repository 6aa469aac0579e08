// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "agentcrm/rng.h"

#include <boost/random/beta_distribution.hpp>
#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

namespace agentcrm {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::split(std::uint64_t label) const {
  return Rng(splitmix64(seed_ ^ splitmix64(label + 0x632be59bd9b4e019ULL)));
}

Rng Rng::split(std::string_view label) const {
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return split(h);
}

// boost::random distributions are specified algorithmically, so a seed gives
// the same draws on every standard library.
double Rng::uniform() { return boost::random::uniform_01<double>()(engine_); }

double Rng::uniform_open0() { return 1.0 - uniform(); }

double Rng::normal(double mean, double stddev) {
  return boost::random::normal_distribution<double>(mean, stddev)(engine_);
}

double Rng::beta(double alpha, double beta) {
  return boost::random::beta_distribution<double>(alpha, beta)(engine_);
}

double Rng::exponential(double rate) {
  return boost::random::exponential_distribution<double>(rate)(engine_);
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  return boost::random::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
}

}  // namespace agentcrm
