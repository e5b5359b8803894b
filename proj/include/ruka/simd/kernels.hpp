#pragma once

// Data-parallel inner loops shared by the neural kernel, k-NN retrieval and
// grid search. Each kernel has a scalar reference and an AVX2 variant; the
// variant is picked once at startup from CPUID (override with RUKA_SIMD=scalar
// or RUKA_SIMD=avx2).
//
// Contract between variants:
//   axpy, accumulate_sq_diff, argmin  bit-identical to the scalar reference
//   dot                               equal up to summation order (fused, 4x4 lanes)

#include <cstddef>
#include <span>
#include <string_view>

namespace ruka::simd {

struct KernelTable {
  std::string_view name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out[i] += (column[i] - q)^2
  void (*accumulate_sq_diff)(const double* column, double q, double* out, std::size_t n);
  // index of the first minimum; n must be > 0
  std::size_t (*argmin)(const double* v, std::size_t n);
};

const KernelTable& scalar_kernels();
/// nullptr when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels();
/// Kernel table chosen at runtime.
const KernelTable& active_kernels();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active_kernels().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active_kernels().axpy(alpha, x.data(), y.data(), x.size());
}

inline void accumulate_sq_diff(std::span<const double> column, double q, std::span<double> out) {
  active_kernels().accumulate_sq_diff(column.data(), q, out.data(), column.size());
}

inline std::size_t argmin(std::span<const double> v) {
  return active_kernels().argmin(v.data(), v.size());
}

}  // namespace ruka::simd
