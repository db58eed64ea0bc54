#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "kkt/rng.hpp"
#include "kkt/target.hpp"

namespace kkt::test {

/// Largest relative error of the analytic gradient against central
/// differences, measured as |g - fd| / max(1, |fd|) per coordinate.
inline double gradient_relative_error(const TargetDensity& t, std::span<const double> x,
                                      double h = 1e-5) {
  const Vector g = t.grad_log_density(x);
  Vector xp(x.begin(), x.end());
  double worst = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double keep = xp[j];
    xp[j] = keep + h;
    const double up = t.log_density(xp);
    xp[j] = keep - h;
    const double down = t.log_density(xp);
    xp[j] = keep;
    const double fd = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(g[j] - fd) / std::max(1.0, std::abs(fd)));
  }
  return worst;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// One-sample Kolmogorov-Smirnov statistic against N(0, 1).
inline double ks_against_normal(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = normal_cdf(xs[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

/// Fresh empty directory under the system temp dir, private to this process.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("kkt_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace kkt::test
