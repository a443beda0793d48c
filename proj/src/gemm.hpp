// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

// Plain row-major GEMM accumulation kernels shared by matmul and linear.

#pragma once

#include <cstddef>
#include <cstring>
#include <vector>

namespace eanet::gemm {

using v4d = double __attribute__((vector_size(32)));

inline v4d load4(const double* p) {
  v4d v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}

inline void store4(double* p, v4d v) { std::memcpy(p, &v, sizeof(v)); }

// Four-lane dot product; the lane order is fixed, so results are reproducible.
inline double dot(const double* x, const double* y, std::size_t n) {
  v4d s = {0.0, 0.0, 0.0, 0.0};
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) s += load4(x + j) * load4(y + j);
  double r = (s[0] + s[1]) + (s[2] + s[3]);
  for (; j < n; ++j) r += x[j] * y[j];
  return r;
}

// C[m,n] += A[m,k] * B[k,n]. Full 4x8 tiles keep their accumulators in
// registers across the k loop; edges fall back to row axpys. Every output
// element is accumulated over p in ascending order on both paths, so the
// result does not depend on which path handled it.
inline void acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                std::size_t n) {
  constexpr std::size_t MR = 4, NR = 8;
  std::size_t m_full = m - m % MR;
  std::size_t n_full = n - n % NR;
  for (std::size_t i = 0; i < m_full; i += MR) {
    const double* a0 = a + i * k;
    const double* a1 = a0 + k;
    const double* a2 = a1 + k;
    const double* a3 = a2 + k;
    for (std::size_t j = 0; j < n_full; j += NR) {
      double* c0 = c + i * n + j;
      double* c1 = c0 + n;
      double* c2 = c1 + n;
      double* c3 = c2 + n;
      v4d t00 = load4(c0), t01 = load4(c0 + 4), t10 = load4(c1), t11 = load4(c1 + 4);
      v4d t20 = load4(c2), t21 = load4(c2 + 4), t30 = load4(c3), t31 = load4(c3 + 4);
      for (std::size_t p = 0; p < k; ++p) {
        v4d b0 = load4(b + p * n + j);
        v4d b1 = load4(b + p * n + j + 4);
        t00 += a0[p] * b0;
        t01 += a0[p] * b1;
        t10 += a1[p] * b0;
        t11 += a1[p] * b1;
        t20 += a2[p] * b0;
        t21 += a2[p] * b1;
        t30 += a3[p] * b0;
        t31 += a3[p] * b1;
      }
      store4(c0, t00), store4(c0 + 4, t01), store4(c1, t10), store4(c1 + 4, t11);
      store4(c2, t20), store4(c2 + 4, t21), store4(c3, t30), store4(c3 + 4, t31);
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t j0 = i < m_full ? n_full : 0;
    if (j0 == n) continue;
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      double av = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = j0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// dA[m,k] += dC[m,n] * B[k,n]^T, via an explicit transpose of B so the inner
// loop is an axpy rather than a strict-order reduction.
inline void acc_bt(const double* dc, const double* b, double* da, std::size_t m, std::size_t k,
                   std::size_t n) {
  if (m == 1) {
    for (std::size_t p = 0; p < k; ++p) da[p] += dot(dc, b + p * n, n);
    return;
  }
  std::vector<double> bt(n * k);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
  acc(dc, bt.data(), da, m, n, k);
}

// dB[k,n] += A[m,k]^T * dC[m,n], through a transposed copy of A.
inline void acc_at(const double* a, const double* dc, double* db, std::size_t m, std::size_t k,
                   std::size_t n) {
  std::vector<double> at(k * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) at[p * m + i] = a[i * k + p];
  acc(at.data(), dc, db, k, m, n);
}

}  // namespace eanet::gemm
