// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "agentcrm/simd/kernels.h"

namespace agentcrm::simd {
namespace {

// -1: no override.
std::atomic<int> g_forced{-1};

bool cpu_has_avx2() {
#if defined(AGENTCRM_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa env_or_detected() {
  static const Isa isa = [] {
    const Isa detected = detected_isa();
    const char* env = std::getenv("AGENTCRM_SIMD");
    if (env != nullptr && std::string(env) == "scalar") return Isa::kScalar;
    return detected;
  }();
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

Isa detected_isa() {
  static const bool avx2 = cpu_has_avx2();
  return avx2 ? Isa::kAvx2 : Isa::kScalar;
}

Isa active_isa() {
  const int forced = g_forced.load(std::memory_order_relaxed);
  if (forced >= 0) return static_cast<Isa>(forced);
  return env_or_detected();
}

void force_isa(std::optional<Isa> isa) {
  if (isa && *isa == Isa::kAvx2 && detected_isa() != Isa::kAvx2) {
    throw std::invalid_argument("AVX2 kernels are not available on this CPU");
  }
  g_forced.store(isa ? static_cast<int>(*isa) : -1, std::memory_order_relaxed);
}

double decayed_sum(std::span<const double> coeff, std::span<const double> offset,
                   double half_life) {
#if defined(AGENTCRM_HAVE_AVX2)
  if (active_isa() == Isa::kAvx2) return avx2::decayed_sum(coeff, offset, half_life);
#endif
  return scalar::decayed_sum(coeff, offset, half_life);
}

void squared_distances(std::span<const double> query, std::span<const double> columns,
                       std::span<double> out) {
#if defined(AGENTCRM_HAVE_AVX2)
  if (active_isa() == Isa::kAvx2) return avx2::squared_distances(query, columns, out);
#endif
  scalar::squared_distances(query, columns, out);
}

}  // namespace agentcrm::simd
