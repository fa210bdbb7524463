#include <cstdlib>
#include <string_view>

#include "agenther/simd.hpp"

namespace agenther::simd {

#if defined(AGENTHER_HAVE_AVX2)
const Kernels& avx2_kernel_table();
#endif
#if defined(AGENTHER_HAVE_NEON)
const Kernels& neon_kernel_table();
#endif

const Kernels* avx2_kernels() {
#if defined(AGENTHER_HAVE_AVX2)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return &avx2_kernel_table();
#endif
  return nullptr;
}

const Kernels* neon_kernels() {
#if defined(AGENTHER_HAVE_NEON)
  return &neon_kernel_table();  // mandatory on aarch64
#else
  return nullptr;
#endif
}

const Kernels& active_kernels() {
  static const Kernels* chosen = [] {
    const char* env = std::getenv("AGENTHER_SIMD");
    if (env && std::string_view(env) == "scalar") return &scalar_kernels();
    if (const Kernels* k = avx2_kernels()) return k;
    if (const Kernels* k = neon_kernels()) return k;
    return &scalar_kernels();
  }();
  return *chosen;
}

}  // namespace agenther::simd
