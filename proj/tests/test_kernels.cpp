// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "segloc/kernels.hpp"
#include "segloc/rng.hpp"

namespace segloc::kernels {
namespace {

template <class T>
std::vector<T> rand_vec(std::size_t n, Rng& rng) {
  std::vector<T> v(n);
  for (T& x : v) x = static_cast<T>(rng.uniform(-1.0, 1.0));
  return v;
}

template <class T>
double tol() {
  return std::is_same_v<T, double> ? 1e-13 : 2e-6;
}

template <class T>
class KernelTest : public ::testing::Test {};
using Types = ::testing::Types<float, double>;
TYPED_TEST_SUITE(KernelTest, Types);

TYPED_TEST(KernelTest, DotAndAxpyMatchScalar) {
  using T = TypeParam;
  if (!supported(Isa::Avx2)) GTEST_SKIP() << "no AVX2";
  const auto& s = table<T>(Isa::Scalar);
  const auto& v = table<T>(Isa::Avx2);
  Rng rng(1);
  for (std::size_t n : {0u, 1u, 3u, 7u, 8u, 9u, 16u, 31u, 33u, 100u, 257u}) {
    const auto a = rand_vec<T>(n, rng), b = rand_vec<T>(n, rng);
    double mag = 1.0;
    for (std::size_t i = 0; i < n; ++i) mag += std::abs(double(a[i]) * b[i]);
    EXPECT_NEAR(s.dot(a.data(), b.data(), n), v.dot(a.data(), b.data(), n), tol<T>() * mag) << n;
    auto y1 = rand_vec<T>(n, rng), y2 = y1;
    s.axpy(T(0.75), a.data(), y1.data(), n);
    v.axpy(T(0.75), a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(y1[i], y2[i], 4 * tol<T>());
  }
}

// Reference C += op(A) op(B) in long double.
template <class T>
void ref_gemm(char mode, int m, int n, int k, const std::vector<T>& a, const std::vector<T>& b, std::vector<T>& c,
              std::vector<double>& mag) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      long double acc = c[i * n + j];
      double sum_abs = std::abs(double(c[i * n + j]));
      for (int p = 0; p < k; ++p) {
        const T x = mode == 't' ? a[p * m + i] : a[i * k + p];
        const T y = mode == 'n' || mode == 't' ? b[p * n + j] : b[j * k + p];
        acc += static_cast<long double>(x) * y;
        sum_abs += std::abs(double(x) * y);
      }
      c[i * n + j] = static_cast<T>(acc);
      mag[i * n + j] = sum_abs + 1.0;
    }
}

TYPED_TEST(KernelTest, GemmVariantsMatchReference) {
  using T = TypeParam;
  Rng rng(2);
  std::vector<Isa> isas{Isa::Scalar};
  if (supported(Isa::Avx2)) isas.push_back(Isa::Avx2);
  for (Isa isa : isas) {
    const auto& kt = table<T>(isa);
    for (auto [m, n, k] : std::vector<std::array<int, 3>>{{1, 1, 1}, {3, 5, 7}, {4, 17, 9}, {9, 33, 40}, {2, 64, 3}}) {
      const auto a = rand_vec<T>(std::size_t(m) * k, rng), b = rand_vec<T>(std::size_t(k) * n, rng);
      const auto c0 = rand_vec<T>(std::size_t(m) * n, rng);
      for (char mode : {'n', 'r', 't'}) {  // nn, nt, tn
        auto c = c0, ref = c0;
        std::vector<double> mag(c.size());
        ref_gemm(mode, m, n, k, a, b, ref, mag);
        if (mode == 'n') kt.gemm_nn(m, n, k, a.data(), k, b.data(), n, c.data(), n);
        if (mode == 'r') kt.gemm_nt(m, n, k, a.data(), k, b.data(), k, c.data(), n);
        if (mode == 't') kt.gemm_tn(m, n, k, a.data(), m, b.data(), n, c.data(), n);
        for (std::size_t i = 0; i < c.size(); ++i)
          ASSERT_NEAR(c[i], ref[i], 4 * tol<T>() * mag[i]) << isa_name(isa) << " " << mode << " " << m << "x" << n << "x" << k;
      }
    }
  }
}

TYPED_TEST(KernelTest, RowResultIndependentOfBatch) {
  using T = TypeParam;
  Rng rng(3);
  const int m = 13, n = 37, k = 29;
  const auto a = rand_vec<T>(std::size_t(m) * k, rng), b = rand_vec<T>(std::size_t(k) * n, rng);
  for (Isa isa : {Isa::Scalar, Isa::Avx2}) {
    if (!supported(isa)) continue;
    const auto& kt = table<T>(isa);
    std::vector<T> all(std::size_t(m) * n, T(0));
    kt.gemm_nn(m, n, k, a.data(), k, b.data(), n, all.data(), n);
    for (int r = 0; r < m; ++r) {
      std::vector<T> one(n, T(0));
      kt.gemm_nn(1, n, k, a.data() + r * k, k, b.data(), n, one.data(), n);
      for (int j = 0; j < n; ++j) ASSERT_EQ(one[j], all[r * n + j]);
    }
  }
}

TEST(Dispatch, PicksAvx2WhenAvailableAndScopesOverride) {
  const Isa start = active_isa();
  if (supported(Isa::Avx2)) {
    EXPECT_EQ(start, Isa::Avx2);
  }
  {
    IsaScope scope(Isa::Scalar);
    EXPECT_EQ(active_isa(), Isa::Scalar);
    EXPECT_EQ(table<double>().isa, Isa::Scalar);
  }
  EXPECT_EQ(active_isa(), start);
  EXPECT_EQ(isa_name(Isa::Scalar), "scalar");
}

}  // namespace
}  // namespace segloc::kernels
