#include <random>
#include <vector>

#include "doctest.h"
#include "ruka/simd/kernels.hpp"

using ruka::simd::KernelTable;

namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

const KernelTable* wide() { return ruka::simd::avx2_kernels(); }

}  // namespace

TEST_CASE("active table is one of the known variants") {
  const auto& k = ruka::simd::active_kernels();
  CHECK((k.name == "scalar" || k.name == "avx2"));
  if (wide() != nullptr) CHECK(k.name == "avx2");
}

TEST_CASE("avx2 kernels match the scalar reference") {
  if (wide() == nullptr) {
    MESSAGE("AVX2 unavailable; equivalence not exercised");
    return;
  }
  const KernelTable& ref = ruka::simd::scalar_kernels();
  const KernelTable& vec = *wide();
  std::mt19937_64 rng(42);

  for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 35u, 67u, 128u, 1001u}) {
    CAPTURE(n);
    const auto a = random_vector(n, rng);
    const auto b = random_vector(n, rng);

    const double d_ref = ref.dot(a.data(), b.data(), n);
    const double d_vec = vec.dot(a.data(), b.data(), n);
    double magnitude = 0.0;
    for (std::size_t i = 0; i < n; ++i) magnitude += std::abs(a[i] * b[i]);
    CHECK(std::abs(d_ref - d_vec) <= 1e-13 * magnitude);

    auto y_ref = b;
    auto y_vec = b;
    ref.axpy(0.37, a.data(), y_ref.data(), n);
    vec.axpy(0.37, a.data(), y_vec.data(), n);
    CHECK(y_ref == y_vec);

    auto s_ref = b;
    auto s_vec = b;
    ref.accumulate_sq_diff(a.data(), -0.25, s_ref.data(), n);
    vec.accumulate_sq_diff(a.data(), -0.25, s_vec.data(), n);
    CHECK(s_ref == s_vec);

    CHECK(ref.argmin(a.data(), n) == vec.argmin(a.data(), n));
  }
}

TEST_CASE("argmin returns the first of tied minima in every variant") {
  std::vector<double> v = {5, 3, 9, 1, 4, 1, 8, 1, 2, 7, 1, 6};
  CHECK(ruka::simd::scalar_kernels().argmin(v.data(), v.size()) == 3);
  if (wide() != nullptr) CHECK(wide()->argmin(v.data(), v.size()) == 3);
  std::vector<double> flat(37, 2.5);
  CHECK(ruka::simd::scalar_kernels().argmin(flat.data(), flat.size()) == 0);
  if (wide() != nullptr) CHECK(wide()->argmin(flat.data(), flat.size()) == 0);
}

TEST_CASE("empty ranges are no-ops") {
  double y = 1.0;
  CHECK(ruka::simd::scalar_kernels().dot(&y, &y, 0) == 0.0);
  if (wide() != nullptr) {
    CHECK(wide()->dot(&y, &y, 0) == 0.0);
    wide()->axpy(2.0, &y, &y, 0);
    CHECK(y == 1.0);
  }
}
