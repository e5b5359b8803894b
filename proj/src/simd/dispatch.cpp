#include <cstdlib>
#include <string_view>

#include "ruka/simd/kernels.hpp"

namespace ruka::simd {

const KernelTable* avx2_kernels_unchecked();

namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& select() {
  const KernelTable* wide = avx2_kernels();
  const char* env = std::getenv("RUKA_SIMD");
  if (env != nullptr && std::string_view(env) == "scalar") return scalar_kernels();
  if (wide != nullptr) return *wide;
  return scalar_kernels();
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const KernelTable* table = cpu_has_avx2_fma() ? avx2_kernels_unchecked() : nullptr;
  return table;
}

const KernelTable& active_kernels() {
  static const KernelTable& table = select();
  return table;
}

}  // namespace ruka::simd
