// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <vector>

namespace plasm::detail {

// Dense row-major GEMM: C[m x n] (+)= A[m x k] * B[k x n].
//
// Contract: every output element accumulates its k terms in ascending-k
// order, so results are bit-identical to the naive triple loop regardless
// of the blocking below. Blocking only changes which element is worked on
// when, never the order of any single element's partial sums.
template <typename T>
void gemm_nn(int64_t m, int64_t n, int64_t k,
             const T* a, int64_t lda,
             const T* b, int64_t ldb,
             T* c, int64_t ldc, bool accumulate) {
  constexpr int64_t kRowBlock = 4;
  constexpr int64_t kColBlock = 512;

  if (!accumulate) {
    for (int64_t i = 0; i < m; ++i) std::memset(c + i * ldc, 0, sizeof(T) * static_cast<size_t>(n));
  }

  for (int64_t i0 = 0; i0 < m; i0 += kRowBlock) {
    const int64_t ib = std::min(kRowBlock, m - i0);
    for (int64_t j0 = 0; j0 < n; j0 += kColBlock) {
      const int64_t jb = std::min(kColBlock, n - j0);
      if (ib == 4) {
        T* c0 = c + (i0 + 0) * ldc + j0;
        T* c1 = c + (i0 + 1) * ldc + j0;
        T* c2 = c + (i0 + 2) * ldc + j0;
        T* c3 = c + (i0 + 3) * ldc + j0;
        for (int64_t kk = 0; kk < k; ++kk) {
          const T a0 = a[(i0 + 0) * lda + kk];
          const T a1 = a[(i0 + 1) * lda + kk];
          const T a2 = a[(i0 + 2) * lda + kk];
          const T a3 = a[(i0 + 3) * lda + kk];
          const T* bk = b + kk * ldb + j0;
          for (int64_t j = 0; j < jb; ++j) {
            const T bj = bk[j];
            c0[j] += a0 * bj;
            c1[j] += a1 * bj;
            c2[j] += a2 * bj;
            c3[j] += a3 * bj;
          }
        }
      } else {
        for (int64_t i = i0; i < i0 + ib; ++i) {
          T* ci = c + i * ldc + j0;
          for (int64_t kk = 0; kk < k; ++kk) {
            const T ai = a[i * lda + kk];
            const T* bk = b + kk * ldb + j0;
            for (int64_t j = 0; j < jb; ++j) ci[j] += ai * bk[j];
          }
        }
      }
    }
  }
}

// Blocked out-of-place transpose: dst[n x m] = src[m x n]^T (row-major).
template <typename T>
void transpose(int64_t m, int64_t n, const T* src, T* dst) {
  constexpr int64_t kBlk = 32;
  for (int64_t i0 = 0; i0 < m; i0 += kBlk) {
    const int64_t im = std::min(i0 + kBlk, m);
    for (int64_t j0 = 0; j0 < n; j0 += kBlk) {
      const int64_t jm = std::min(j0 + kBlk, n);
      for (int64_t i = i0; i < im; ++i)
        for (int64_t j = j0; j < jm; ++j) dst[j * m + i] = src[i * n + j];
    }
  }
}

}  // namespace plasm::detail
