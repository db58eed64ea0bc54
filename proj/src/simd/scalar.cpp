#include "kkt/simd.hpp"

#include <cmath>

namespace kkt::simd {
namespace {

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void add_scaled_scalar(const double* x, double a, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + a * y[i];
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

double squared_distance_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

double l1_distance_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::fabs(x[i] - y[i]);
  return s;
}

double lattice_terms_scalar(const double* x, const double* f0, const double* f1, const double* f2,
                            const double* bwd, LatticeCoefficients c, double* grad,
                            std::size_t n) {
  double energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
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

const KernelTable& scalar_kernels() {
  static const KernelTable table{Backend::Scalar,           axpy_scalar,
                                 add_scaled_scalar,         dot_scalar,
                                 squared_distance_scalar,   l1_distance_scalar,
                                 lattice_terms_scalar};
  return table;
}

}  // namespace kkt::simd
