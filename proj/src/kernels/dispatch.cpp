// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <stdexcept>
#include <string>

#include "segloc/kernels.hpp"

namespace segloc::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
  }
  return "unknown";
}

bool supported(Isa isa) {
  static const bool avx2 = cpu_has_avx2();
  return isa == Isa::Scalar || (isa == Isa::Avx2 && avx2);
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!supported(isa)) {
    throw std::invalid_argument("instruction set not supported on this CPU: " + std::string(isa_name(isa)));
  }
  active().store(isa, std::memory_order_relaxed);
}

template <class T>
const Table<T>& table(Isa isa) {
  if (isa == Isa::Avx2 && supported(Isa::Avx2)) return detail::avx2_table<T>();
  return detail::scalar_table<T>();
}

template <class T>
const Table<T>& table() {
  return table<T>(active_isa());
}

template const Table<float>& table<float>();
template const Table<double>& table<double>();
template const Table<float>& table<float>(Isa);
template const Table<double>& table<double>(Isa);

}  // namespace segloc::kernels
