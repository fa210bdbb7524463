#include "doctest.h"

#include <cmath>
#include <random>

#include "agenther/simd.hpp"

using namespace agenther::simd;

namespace {

std::vector<const Kernels*> vector_sets() {
  std::vector<const Kernels*> out;
  if (const Kernels* k = avx2_kernels()) out.push_back(k);
  if (const Kernels* k = neon_kernels()) out.push_back(k);
  return out;
}

}  // namespace

TEST_CASE("a vector kernel set is available on this machine") {
  MESSAGE("active kernels: " << active_kernels().name);
#if defined(__x86_64__) || defined(__aarch64__)
  CHECK_FALSE(vector_sets().empty());
#endif
}

TEST_CASE("vector kernels agree with the scalar reference") {
  const Kernels& ref = scalar_kernels();
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 1.0);
  for (const Kernels* k : vector_sets()) {
    INFO(k->name);
    for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 64u, 255u, 256u, 1000u}) {
      std::vector<double> a(n), b(n);
      for (auto& x : a) x = g(rng);
      for (auto& x : b) x = g(rng);
      double scale = 0;
      for (std::size_t i = 0; i < n; ++i) scale += std::abs(a[i] * b[i]);
      CHECK(std::abs(k->dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= 1e-13 * (1 + scale));
      const double l2 = ref.squared_l2(a.data(), b.data(), n);
      CHECK(std::abs(k->squared_l2(a.data(), b.data(), n) - l2) <= 1e-13 * (1 + l2));

      auto y1 = b, y2 = b;
      ref.axpy(0.37, a.data(), y1.data(), n);
      k->axpy(0.37, a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-15 * (1 + std::abs(y1[i])));
    }
  }
}

TEST_CASE("scalar kernels on small inputs") {
  const Kernels& k = scalar_kernels();
  const double a[] = {1, 2, 3};
  const double b[] = {4, 5, 6};
  CHECK(k.dot(a, b, 3) == 32);
  CHECK(k.squared_l2(a, b, 3) == 27);
  double y[] = {1, 1, 1};
  k.axpy(2, a, y, 3);
  CHECK(y[2] == 7);
}
