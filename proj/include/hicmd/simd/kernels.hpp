#pragma once
// Dense inner-loop kernels with a scalar reference path and an AVX2/FMA path
// chosen once per process from the CPU feature set.

#include <cstddef>
#include <string_view>

namespace hicmd::simd {

enum class Isa { kScalar, kAvx2 };

// All matrices are row-major and contiguous. Every gemm accumulates into C.
template <class T>
struct KernelTable {
  // C(MxN) += A(MxK) * B(KxN)
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);
  // C(MxN) += A(MxK) * B(NxK)^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);
  // C(MxN) += A(KxM)^T * B(KxN)
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);
  // y += alpha * x
  void (*axpy)(std::size_t n, T alpha, const T* x, T* y);
  T (*dot)(std::size_t n, const T* x, const T* y);
  T (*sum)(std::size_t n, const T* x);
};

namespace scalar {
template <class T>
const KernelTable<T>& table();
}

namespace avx2 {
// Only valid to call when cpu_supports_avx2() is true.
template <class T>
const KernelTable<T>& table();
}

bool cpu_supports_avx2();

// Active ISA. Defaults to the best supported one; HICMD_SIMD=scalar forces the
// reference path.
Isa active_isa();
std::string_view isa_name(Isa isa);

// Overrides the active ISA (tests and benchmarks). Requesting kAvx2 on a CPU
// without it falls back to scalar. Returns the ISA actually selected.
Isa set_active_isa(Isa isa);

template <class T>
const KernelTable<T>& kernels();

}  // namespace hicmd::simd
