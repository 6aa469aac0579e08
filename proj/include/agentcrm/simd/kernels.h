// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

// Data-parallel inner loops used by the outcome and neighbour-search code.
//
// Each kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant. The public entry points in agentcrm::simd dispatch to the best
// variant the CPU supports; the per-ISA namespaces are exposed so tests can
// check the variants against each other.
namespace agentcrm::simd {

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa);

// Best ISA supported by this CPU and binary.
Isa detected_isa();
// ISA used by the dispatching entry points: the forced ISA if one is set,
// else AGENTCRM_SIMD=scalar|avx2 from the environment, else detected_isa().
Isa active_isa();
// Force an ISA for subsequent dispatch; std::nullopt restores the default.
// Forcing an ISA the CPU lacks throws std::invalid_argument.
void force_isa(std::optional<Isa> isa);

// sum_i coeff[i] * 2^(-|offset[i]| / half_life)
//
// coeff and offset have equal length; half_life > 0.
double decayed_sum(std::span<const double> coeff, std::span<const double> offset,
                   double half_life);

// out[i] = sum_j (columns[j * n + i] - query[j])^2 for i in [0, n).
//
// columns is a column-major matrix with query.size() columns of n rows.
void squared_distances(std::span<const double> query, std::span<const double> columns,
                       std::span<double> out);

namespace scalar {
double decayed_sum(std::span<const double> coeff, std::span<const double> offset,
                   double half_life);
void squared_distances(std::span<const double> query, std::span<const double> columns,
                       std::span<double> out);
}  // namespace scalar

#if defined(AGENTCRM_HAVE_AVX2)
namespace avx2 {
double decayed_sum(std::span<const double> coeff, std::span<const double> offset,
                   double half_life);
void squared_distances(std::span<const double> query, std::span<const double> columns,
                       std::span<double> out);
}  // namespace avx2
#endif

}  // namespace agentcrm::simd
