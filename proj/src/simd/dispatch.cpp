#include <atomic>
#include <cstdlib>
#include <string>

#include "hicmd/simd/kernels.hpp"

namespace hicmd::simd {
namespace {

Isa detect_default() {
  if (const char* env = std::getenv("HICMD_SIMD")) {
    if (std::string(env) == "scalar") return Isa::kScalar;
  }
  return cpu_supports_avx2() ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{detect_default()};
  return isa;
}

}  // namespace

bool cpu_supports_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported;
#else
  return false;
#endif
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

std::string_view isa_name(Isa isa) { return isa == Isa::kAvx2 ? "avx2" : "scalar"; }

Isa set_active_isa(Isa isa) {
  if (isa == Isa::kAvx2 && !cpu_supports_avx2()) isa = Isa::kScalar;
  active().store(isa, std::memory_order_relaxed);
  return isa;
}

template <class T>
const KernelTable<T>& kernels() {
  return active_isa() == Isa::kAvx2 ? avx2::table<T>() : scalar::table<T>();
}

template const KernelTable<float>& kernels<float>();
template const KernelTable<double>& kernels<double>();

}  // namespace hicmd::simd
