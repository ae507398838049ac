// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>

namespace segloc::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

/// Dense arithmetic primitives used by every layer. All matrices are
/// row-major with explicit leading dimensions; the GEMM variants accumulate
/// into C. Every output element is reduced over the inner dimension in
/// ascending order, so a row's result never depends on how many other rows
/// share the call. Chunked encoding relies on that.
template <class T>
struct Table {
  Isa isa;
  T (*dot)(const T* a, const T* b, std::size_t n);
  void (*axpy)(T alpha, const T* x, T* y, std::size_t n);
  // C[MxN] += A[MxK] * B[KxN]
  void (*gemm_nn)(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc);
  // C[MxN] += A[MxK] * B[NxK]^T
  void (*gemm_nt)(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc);
  // C[MxN] += A[KxM]^T * B[KxN]
  void (*gemm_tn)(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc);
};

bool supported(Isa isa);

/// The instruction set picked at startup: AVX2+FMA when the CPU has it.
Isa active_isa();

/// Overrides the runtime choice (tests use this to pin the scalar
/// reference). Throws std::invalid_argument if the CPU lacks `isa`.
void set_active_isa(Isa isa);

template <class T>
const Table<T>& table();

template <class T>
const Table<T>& table(Isa isa);

/// Restores the previous ISA on scope exit.
class IsaScope {
 public:
  explicit IsaScope(Isa isa) : prev_(active_isa()) { set_active_isa(isa); }
  ~IsaScope() { set_active_isa(prev_); }
  IsaScope(const IsaScope&) = delete;
  IsaScope& operator=(const IsaScope&) = delete;

 private:
  Isa prev_;
};

namespace detail {
template <class T>
const Table<T>& scalar_table();
template <class T>
const Table<T>& avx2_table();
}  // namespace detail

}  // namespace segloc::kernels
