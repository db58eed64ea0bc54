#pragma once

// Vector primitives used by the samplers' inner loops.
//
// Every primitive has a scalar reference implementation and, on x86-64, an
// AVX2 variant. The active backend is chosen once per process from the CPU
// feature bits; setting KKT_SIMD=scalar in the environment forces the
// reference path. Elementwise primitives are bitwise identical across
// backends. Reductions differ only in summation order.

#include <cstddef>
#include <span>
#include <string_view>

namespace kkt::simd {

enum class Backend { Scalar, Avx2 };

std::string_view backend_name(Backend backend);

/// Coefficients of the per-site lattice terms
///   e(s) = c2 x^2 + cg sum_e (f_e - x)^2 + c4 x^4
///   g(s) = 2 c2 x + 4 c4 x^3 + 2 cg (6 x - sum_e f_e - sum_e b_e)
/// where f_e / b_e are the forward / backward neighbours along axis e.
struct LatticeCoefficients {
  double quadratic;
  double coupling;
  double quartic;
};

struct KernelTable {
  Backend backend;
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // out = x + a * y
  void (*add_scaled)(const double* x, double a, const double* y, double* out, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
  // sum (x_i - y_i)^2
  double (*squared_distance)(const double* x, const double* y, std::size_t n);
  // sum |x_i - y_i|
  double (*l1_distance)(const double* x, const double* y, std::size_t n);
  // Returns sum_s e(s) and writes g(s), the gradient of that sum.
  double (*lattice_terms)(const double* x, const double* fwd0, const double* fwd1,
                          const double* fwd2, const double* bwd_sum, LatticeCoefficients c,
                          double* grad, std::size_t n);
};

const KernelTable& scalar_kernels();
/// nullptr when the AVX2 variant was not compiled in.
const KernelTable* avx2_kernels();
bool cpu_has_avx2();

/// The table selected for this process.
const KernelTable& active();

// Span wrappers over the active table.

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(a, x.data(), y.data(), y.size());
}

inline void add_scaled(std::span<const double> x, double a, std::span<const double> y,
                       std::span<double> out) {
  active().add_scaled(x.data(), a, y.data(), out.data(), out.size());
}

inline double dot(std::span<const double> x, std::span<const double> y) {
  return active().dot(x.data(), y.data(), x.size());
}

inline double squared_norm(std::span<const double> x) { return dot(x, x); }

inline double squared_distance(std::span<const double> x, std::span<const double> y) {
  return active().squared_distance(x.data(), y.data(), x.size());
}

inline double l1_distance(std::span<const double> x, std::span<const double> y) {
  return active().l1_distance(x.data(), y.data(), x.size());
}

}  // namespace kkt::simd
