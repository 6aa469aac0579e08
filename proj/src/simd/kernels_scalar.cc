// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include <cassert>
#include <cmath>

#include "agentcrm/simd/kernels.h"

namespace agentcrm::simd::scalar {

double decayed_sum(std::span<const double> coeff, std::span<const double> offset,
                   double half_life) {
  assert(coeff.size() == offset.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < coeff.size(); ++i) {
    sum += coeff[i] * std::exp2(-std::abs(offset[i]) / half_life);
  }
  return sum;
}

void squared_distances(std::span<const double> query, std::span<const double> columns,
                       std::span<double> out) {
  const std::size_t n = out.size();
  assert(columns.size() == query.size() * n);
  for (std::size_t i = 0; i < n; ++i) out[i] = 0.0;
  for (std::size_t j = 0; j < query.size(); ++j) {
    const double* col = columns.data() + j * n;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = col[i] - query[j];
      out[i] += d * d;
    }
  }
}

}  // namespace agentcrm::simd::scalar
