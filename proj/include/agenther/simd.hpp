#pragma once

#include <cstddef>
#include <string_view>

// Numeric kernels behind the embedder and k-means. The scalar set is the
// reference; vector sets must agree with it to rounding.
namespace agenther::simd {

struct Kernels {
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_l2)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);  // y += alpha * x
};

const Kernels& scalar_kernels();
// nullptr when not built for this target or not supported by this CPU.
const Kernels* avx2_kernels();
const Kernels* neon_kernels();

// Best set for this CPU. AGENTHER_SIMD=scalar forces the reference set.
const Kernels& active_kernels();

}  // namespace agenther::simd
