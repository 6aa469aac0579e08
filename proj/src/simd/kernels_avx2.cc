// Copyright 2026 The agentcrm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include <immintrin.h>

#include <cassert>
#include <cmath>

#include "agentcrm/simd/kernels.h"

namespace agentcrm::simd::avx2 {
namespace {

// 2^x for x in [-1022, 0].
//
// Splits x = n + f with n = round(x), |f| <= 1/2, evaluates e^(f ln 2) with a
// degree-13 Taylor polynomial (truncation error < 2e-17 relative) and scales
// by 2^n through the exponent field.
inline __m256d exp2_nonpositive(__m256d x) {
  x = _mm256_max_pd(x, _mm256_set1_pd(-1022.0));
  const __m256d n = _mm256_round_pd(x, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  const __m256d y = _mm256_mul_pd(_mm256_sub_pd(x, n), _mm256_set1_pd(0.69314718055994530942));

  // 1/k! for k = 13 down to 0.
  static constexpr double kInvFact[] = {
      1.6059043836821614599e-10, 2.0876756987868098979e-09, 2.5052108385441718775e-08,
      2.7557319223985890653e-07, 2.7557319223985890653e-06, 2.4801587301587301587e-05,
      1.9841269841269841270e-04, 1.3888888888888888889e-03, 8.3333333333333333333e-03,
      4.1666666666666666667e-02, 1.6666666666666666667e-01, 5.0000000000000000000e-01,
      1.0,                       1.0};
  __m256d p = _mm256_set1_pd(kInvFact[0]);
  for (int k = 1; k < 14; ++k) {
    p = _mm256_fmadd_pd(p, y, _mm256_set1_pd(kInvFact[k]));
  }

  // n + 1.5 * 2^52 puts n in the low mantissa bits as a two's complement int.
  const __m256d magic = _mm256_set1_pd(6755399441055744.0);
  __m256i bits = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(n, magic)),
                                  _mm256_castpd_si256(magic));
  bits = _mm256_slli_epi64(_mm256_add_epi64(bits, _mm256_set1_epi64x(1023)), 52);
  return _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
}

inline double horizontal_sum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

double decayed_sum(std::span<const double> coeff, std::span<const double> offset,
                   double half_life) {
  assert(coeff.size() == offset.size());
  const std::size_t n = coeff.size();
  const __m256d sign = _mm256_set1_pd(-0.0);
  const __m256d h = _mm256_set1_pd(half_life);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d off = _mm256_loadu_pd(offset.data() + i);
    // -|off| / h
    const __m256d x = _mm256_div_pd(_mm256_or_pd(off, sign), h);
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(coeff.data() + i), exp2_nonpositive(x), acc);
  }
  double sum = horizontal_sum(acc);
  for (; i < n; ++i) {
    sum += coeff[i] * std::exp2(-std::abs(offset[i]) / half_life);
  }
  return sum;
}

void squared_distances(std::span<const double> query, std::span<const double> columns,
                       std::span<double> out) {
  const std::size_t n = out.size();
  assert(columns.size() == query.size() * n);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t j = 0; j < query.size(); ++j) {
      const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(columns.data() + j * n + i),
                                      _mm256_set1_pd(query[j]));
      acc = _mm256_fmadd_pd(d, d, acc);
    }
    _mm256_storeu_pd(out.data() + i, acc);
  }
  for (; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < query.size(); ++j) {
      const double d = columns[j * n + i] - query[j];
      acc += d * d;
    }
    out[i] = acc;
  }
}

}  // namespace agentcrm::simd::avx2
