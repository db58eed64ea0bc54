// AVX2 variants. This translation unit is the only one built with -mavx2 and
// is only entered after the dispatcher has checked the CPU feature bit.

#include "kkt/simd.hpp"

#include <immintrin.h>

#include <cmath>

namespace kkt::simd {
namespace {

constexpr std::size_t kLanes = 4;

inline double horizontal_sum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  const __m128d swapped = _mm_unpackhi_pd(pair, pair);
  return _mm_cvtsd_f64(_mm_add_sd(pair, swapped));
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void add_scaled_avx2(const double* x, double a, const double* y, double* out, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), prod));
  }
  for (; i < n; ++i) out[i] = x[i] + a * y[i];
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  double s = horizontal_sum(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

double squared_distance_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double s = horizontal_sum(acc);
  for (; i < n; ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

double l1_distance_avx2(const double* x, const double* y, std::size_t n) {
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    acc = _mm256_add_pd(acc, _mm256_andnot_pd(sign_mask, d));
  }
  double s = horizontal_sum(acc);
  for (; i < n; ++i) s += std::fabs(x[i] - y[i]);
  return s;
}

double lattice_terms_avx2(const double* x, const double* f0, const double* f1, const double* f2,
                          const double* bwd, LatticeCoefficients c, double* grad, std::size_t n) {
  const __m256d c2 = _mm256_set1_pd(c.quadratic);
  const __m256d cg = _mm256_set1_pd(c.coupling);
  const __m256d c4 = _mm256_set1_pd(c.quartic);
  // Same association order as the scalar reference so the gradient matches bitwise.
  const __m256d g2 = _mm256_set1_pd(2.0 * c.quadratic);
  const __m256d g4 = _mm256_set1_pd(4.0 * c.quartic);
  const __m256d gg = _mm256_set1_pd(2.0 * c.coupling);
  const __m256d six = _mm256_set1_pd(6.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d xi = _mm256_loadu_pd(x + i);
    const __m256d a0 = _mm256_loadu_pd(f0 + i);
    const __m256d a1 = _mm256_loadu_pd(f1 + i);
    const __m256d a2 = _mm256_loadu_pd(f2 + i);
    const __m256d x2 = _mm256_mul_pd(xi, xi);
    const __m256d d0 = _mm256_sub_pd(a0, xi);
    const __m256d d1 = _mm256_sub_pd(a1, xi);
    const __m256d d2 = _mm256_sub_pd(a2, xi);
    const __m256d diff2 = _mm256_add_pd(
        _mm256_add_pd(_mm256_mul_pd(d0, d0), _mm256_mul_pd(d1, d1)), _mm256_mul_pd(d2, d2));
    const __m256d e = _mm256_add_pd(
        _mm256_add_pd(_mm256_mul_pd(c2, x2), _mm256_mul_pd(cg, diff2)),
        _mm256_mul_pd(c4, _mm256_mul_pd(x2, x2)));
    acc = _mm256_add_pd(acc, e);
    const __m256d fsum = _mm256_add_pd(_mm256_add_pd(a0, a1), a2);
    const __m256d lap = _mm256_sub_pd(_mm256_sub_pd(_mm256_mul_pd(six, xi), fsum),
                                      _mm256_loadu_pd(bwd + i));
    const __m256d g = _mm256_add_pd(
        _mm256_add_pd(_mm256_mul_pd(g2, xi), _mm256_mul_pd(g4, _mm256_mul_pd(x2, xi))),
        _mm256_mul_pd(gg, lap));
    _mm256_storeu_pd(grad + i, g);
  }
  double energy = horizontal_sum(acc);
  for (; i < n; ++i) {
    const double xi = x[i];
    const double x2 = xi * xi;
    const double d0 = f0[i] - xi;
    const double d1 = f1[i] - xi;
    const double d2 = f2[i] - xi;
    const double diff2 = d0 * d0 + d1 * d1 + d2 * d2;
    energy += c.quadratic * x2 + c.coupling * diff2 + c.quartic * (x2 * x2);
    const double lap = 6.0 * xi - (f0[i] + f1[i] + f2[i]) - bwd[i];
    grad[i] = 2.0 * c.quadratic * xi + 4.0 * c.quartic * (x2 * xi) + 2.0 * c.coupling * lap;
  }
  return energy;
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const KernelTable table{Backend::Avx2,        axpy_avx2,          add_scaled_avx2,
                                 dot_avx2,             squared_distance_avx2, l1_distance_avx2,
                                 lattice_terms_avx2};
  return &table;
}

}  // namespace kkt::simd
