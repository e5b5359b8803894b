#include "ruka/simd/kernels.hpp"

namespace ruka::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void accumulate_sq_diff_scalar(const double* column, double q, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double d = column[i] - q;
    out[i] += d * d;
  }
}

std::size_t argmin_scalar(const double* v, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (v[i] < v[best]) best = i;
  }
  return best;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar", dot_scalar, axpy_scalar, accumulate_sq_diff_scalar,
                                 argmin_scalar};
  return table;
}

}  // namespace ruka::simd
