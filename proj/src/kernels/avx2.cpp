// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

// AVX2 + FMA kernels. This translation unit is compiled with -mavx2 -mfma;
// nothing here may run before kernels::supported(Isa::Avx2) says so.

#include <immintrin.h>

#include "segloc/kernels.hpp"

namespace segloc::kernels::detail {
namespace {

template <class T>
struct Vec;

template <>
struct Vec<double> {
  using reg = __m256d;
  static constexpr int width = 4;
  static reg zero() { return _mm256_setzero_pd(); }
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg bcast(double v) { return _mm256_set1_pd(v); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static double hsum(reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
  }
};

template <>
struct Vec<float> {
  using reg = __m256;
  static constexpr int width = 8;
  static reg zero() { return _mm256_setzero_ps(); }
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static reg bcast(float v) { return _mm256_set1_ps(v); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static float hsum(reg v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehl_ps(lo, lo);
    lo = _mm_add_ps(lo, sh);
    sh = _mm_shuffle_ps(lo, lo, 0x1);
    return _mm_cvtss_f32(_mm_add_ss(lo, sh));
  }
};

template <class T>
T dot(const T* a, const T* b, std::size_t n) {
  using V = Vec<T>;
  constexpr std::size_t w = V::width;
  auto acc0 = V::zero();
  auto acc1 = V::zero();
  std::size_t i = 0;
  for (; i + 2 * w <= n; i += 2 * w) {
    acc0 = V::fmadd(V::load(a + i), V::load(b + i), acc0);
    acc1 = V::fmadd(V::load(a + i + w), V::load(b + i + w), acc1);
  }
  for (; i + w <= n; i += w) acc0 = V::fmadd(V::load(a + i), V::load(b + i), acc0);
  T acc = V::hsum(V::add(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  using V = Vec<T>;
  constexpr std::size_t w = V::width;
  const auto av = V::bcast(alpha);
  std::size_t i = 0;
  for (; i + w <= n; i += w) V::store(y + i, V::fmadd(av, V::load(x + i), V::load(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// One row of C against all of B, four vector columns held in registers
// across the whole k loop. Per element the accumulation is still k-ascending.
template <class T>
void gemm_nn_row(int n, int k, const T* arow, const T* b, int ldb, T* crow) {
  using V = Vec<T>;
  constexpr int w = V::width;
  int j = 0;
  for (; j + 4 * w <= n; j += 4 * w) {
    auto c0 = V::load(crow + j);
    auto c1 = V::load(crow + j + w);
    auto c2 = V::load(crow + j + 2 * w);
    auto c3 = V::load(crow + j + 3 * w);
    for (int p = 0; p < k; ++p) {
      const T* brow = b + static_cast<std::size_t>(p) * ldb + j;
      const auto av = V::bcast(arow[p]);
      c0 = V::fmadd(av, V::load(brow), c0);
      c1 = V::fmadd(av, V::load(brow + w), c1);
      c2 = V::fmadd(av, V::load(brow + 2 * w), c2);
      c3 = V::fmadd(av, V::load(brow + 3 * w), c3);
    }
    V::store(crow + j, c0);
    V::store(crow + j + w, c1);
    V::store(crow + j + 2 * w, c2);
    V::store(crow + j + 3 * w, c3);
  }
  for (; j + w <= n; j += w) {
    auto c0 = V::load(crow + j);
    for (int p = 0; p < k; ++p) {
      c0 = V::fmadd(V::bcast(arow[p]), V::load(b + static_cast<std::size_t>(p) * ldb + j), c0);
    }
    V::store(crow + j, c0);
  }
  for (; j < n; ++j) {
    T acc = crow[j];
    for (int p = 0; p < k; ++p) acc += arow[p] * b[static_cast<std::size_t>(p) * ldb + j];
    crow[j] = acc;
  }
}

template <class T>
void gemm_nn(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    gemm_nn_row(n, k, a + static_cast<std::size_t>(i) * lda, b, ldb,
                c + static_cast<std::size_t>(i) * ldc);
  }
}

template <class T>
void gemm_nt(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::size_t>(i) * lda;
    T* crow = c + static_cast<std::size_t>(i) * ldc;
    for (int j = 0; j < n; ++j) {
      crow[j] += dot(arow, b + static_cast<std::size_t>(j) * ldb, static_cast<std::size_t>(k));
    }
  }
}

template <class T>
void gemm_tn(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc) {
  for (int p = 0; p < k; ++p) {
    const T* arow = a + static_cast<std::size_t>(p) * lda;
    const T* brow = b + static_cast<std::size_t>(p) * ldb;
    for (int i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T(0)) continue;
      axpy(av, brow, c + static_cast<std::size_t>(i) * ldc, static_cast<std::size_t>(n));
    }
  }
}

}  // namespace

template <class T>
const Table<T>& avx2_table() {
  static const Table<T> t{Isa::Avx2, &dot<T>, &axpy<T>, &gemm_nn<T>, &gemm_nt<T>, &gemm_tn<T>};
  return t;
}

template const Table<float>& avx2_table<float>();
template const Table<double>& avx2_table<double>();

}  // namespace segloc::kernels::detail
