#include "kkt/diagnostics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <stdexcept>

#include "kkt/numeric.hpp"

namespace kkt {

Vector Trace::column(std::size_t j) const {
  Vector c(size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = values[i * dim + j];
  return c;
}

void Trace::push(std::uint64_t step_index, bool tele, bool acc, std::span<const double> x) {
  step.push_back(step_index);
  teleported.push_back(tele);
  accepted.push_back(acc);
  values.insert(values.end(), x.begin(), x.end());
}

void Trace::push(const KktState& s) { push(s.step_index, s.teleported, s.candidate_accepted, s.y); }

void Trace::reserve(std::size_t n) {
  step.reserve(n);
  teleported.reserve(n);
  accepted.reserve(n);
  values.reserve(n * dim);
}

// ---------------------------------------------------------------------------

namespace {

// FFTW planning is not thread safe.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Biased autocovariances gamma_0..gamma_{n-1} of a centred series.
std::vector<double> autocovariance(const std::vector<double>& centred) {
  const std::size_t n = centred.size();
  const std::size_t m = 2 * n;
  const std::size_t mc = m / 2 + 1;
  auto* in = static_cast<double*>(fftw_malloc(sizeof(double) * m));
  auto* freq = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * mc));
  if (!in || !freq) {
    fftw_free(in);
    fftw_free(freq);
    throw std::bad_alloc();
  }
  std::unique_ptr<double, decltype(&fftw_free)> in_guard(in, fftw_free);
  std::unique_ptr<fftw_complex, decltype(&fftw_free)> freq_guard(freq, fftw_free);
  fftw_plan forward;
  fftw_plan backward;
  {
    std::lock_guard lock(fftw_planner_mutex());
    forward = fftw_plan_dft_r2c_1d(static_cast<int>(m), in, freq, FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_1d(static_cast<int>(m), freq, in, FFTW_ESTIMATE);
  }
  std::copy(centred.begin(), centred.end(), in);
  std::fill(in + n, in + m, 0.0);
  fftw_execute(forward);
  for (std::size_t k = 0; k < mc; ++k) {
    freq[k][0] = freq[k][0] * freq[k][0] + freq[k][1] * freq[k][1];
    freq[k][1] = 0.0;
  }
  fftw_execute(backward);
  std::vector<double> acov(n);
  // Unnormalized inverse transform carries a factor m.
  for (std::size_t k = 0; k < n; ++k) acov[k] = in[k] / (static_cast<double>(m) * static_cast<double>(n));
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
  }
  return acov;
}

}  // namespace

EssResult ess(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 100) throw std::invalid_argument("ESS needs at least 100 values, got " + std::to_string(n));
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
  std::vector<double> centred(n);
  bool constant = true;
  for (std::size_t i = 0; i < n; ++i) {
    centred[i] = series[i] - mean;
    constant = constant && series[i] == series[0];
  }
  EssResult r;
  if (constant) {
    r.degenerate = true;
    r.tau = std::numeric_limits<double>::infinity();
    return r;
  }
  const std::vector<double> acov = autocovariance(centred);
  if (!(acov[0] > 0.0)) {
    r.degenerate = true;
    r.tau = std::numeric_limits<double>::infinity();
    return r;
  }
  // Pair sums Gamma_t = rho_{2t} + rho_{2t+1}, kept while positive.
  double pair_total = 0.0;
  for (std::size_t t = 0; 2 * t + 1 < n; ++t) {
    const double g = (acov[2 * t] + acov[2 * t + 1]) / acov[0];
    if (!(g > 0.0)) break;
    pair_total += g;
  }
  r.tau = 2.0 * pair_total - 1.0;
  const double dn = static_cast<double>(n);
  if (r.tau < 1.0) {
    r.clipped = true;
    r.ess = dn;
  } else {
    r.ess = dn / r.tau;
  }
  return r;
}

Spread spread(std::span<const double> v) {
  Spread s;
  if (v.empty()) return s;
  const double k = static_cast<double>(v.size());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / k;
  for (double x : v) s.variance += (x - s.mean) * (x - s.mean);
  s.variance /= k;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  s.min = *lo;
  s.max = *hi;
  return s;
}

EssReport ess_report(const Trace& trace, std::uint64_t density_evals, std::uint64_t grad_evals) {
  const double n = static_cast<double>(trace.size());
  if (trace.size() == 0) throw std::invalid_argument("empty trace");
  const double dens_per_step = static_cast<double>(density_evals) / n;
  const double grad_per_step = static_cast<double>(grad_evals) / n;
  const double all_per_step = dens_per_step + grad_per_step;
  EssReport r;
  for (std::size_t j = 0; j < trace.dim; ++j) {
    const Vector col = trace.column(j);
    const EssResult e = ess(col);
    if (e.degenerate) r.degenerate_coordinates.push_back(j);
    if (e.clipped) r.clipped_coordinates.push_back(j);
    r.per_coordinate_ess.push_back(e.ess);
    if (all_per_step > 0.0) r.ess_per_eval.push_back(e.ess / all_per_step);
    if (dens_per_step > 0.0) r.ess_per_density_eval.push_back(e.ess / dens_per_step);
    if (grad_per_step > 0.0) r.ess_per_grad_eval.push_back(e.ess / grad_per_step);
  }
  r.ess_spread = spread(r.per_coordinate_ess);
  r.per_eval_spread = spread(r.ess_per_eval);
  r.per_density_spread = spread(r.ess_per_density_eval);
  r.per_grad_spread = spread(r.ess_per_grad_eval);
  return r;
}

// ---------------------------------------------------------------------------

TraceSummary summarize(const ChainSummary& chain, std::uint64_t seed) {
  TraceSummary s;
  s.n_steps = chain.n_steps;
  s.n_teleports = chain.n_teleports;
  s.teleport_fraction =
      chain.n_steps ? static_cast<double>(chain.n_teleports) / static_cast<double>(chain.n_steps) : 0.0;
  s.base_accept_rate =
      chain.n_steps ? static_cast<double>(chain.n_base_accepts) / static_cast<double>(chain.n_steps)
                    : 0.0;
  s.q_accept_rate = chain.n_teleports ? static_cast<double>(chain.n_q_accepts) /
                                            static_cast<double>(chain.n_teleports)
                                      : 0.0;
  s.density_evals = chain.density_evals;
  s.grad_evals = chain.grad_evals;
  s.seed = seed;
  return s;
}

std::vector<double> mode_weights(const Trace& trace, const std::vector<CriticalRegion>& parts) {
  std::vector<double> w(parts.size(), 0.0);
  if (trace.size() == 0) return w;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto x = trace.point(i);
    for (std::size_t k = 0; k < parts.size(); ++k) w[k] += parts[k].contains(x);
  }
  for (double& v : w) v /= static_cast<double>(trace.size());
  return w;
}

// ---------------------------------------------------------------------------

std::size_t Grid::cell_count() const {
  std::size_t c = 1;
  for (std::size_t b : bins) c *= b;
  return c;
}

double Grid::edge(std::size_t axis, std::size_t i) const {
  return lower[axis] +
         (upper[axis] - lower[axis]) * static_cast<double>(i) / static_cast<double>(bins[axis]);
}

std::size_t Grid::cell_of(std::span<const double> x) const {
  std::size_t flat = 0;
  for (std::size_t a = 0; a < bins.size(); ++a) {
    if (!(x[a] >= lower[a] && x[a] < upper[a])) return cell_count();
    auto i = static_cast<std::size_t>((x[a] - lower[a]) / (upper[a] - lower[a]) *
                                      static_cast<double>(bins[a]));
    i = std::min(i, bins[a] - 1);
    flat = flat * bins[a] + i;
  }
  return flat;
}

std::vector<double> empirical_mass(const Trace& trace, const Grid& grid,
                                   std::span<const std::size_t> coords) {
  std::vector<double> mass(grid.cell_count() + 1, 0.0);
  if (trace.size() == 0) return mass;
  Vector sub(grid.dim());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto x = trace.point(i);
    for (std::size_t a = 0; a < grid.dim(); ++a) sub[a] = x[coords.empty() ? a : coords[a]];
    mass[grid.cell_of(sub)] += 1.0;
  }
  for (double& m : mass) m /= static_cast<double>(trace.size());
  return mass;
}

std::vector<double> quadrature_mass(const TargetDensity& target, const Grid& grid,
                                    std::size_t subdivisions) {
  if (grid.dim() != target.dim()) throw std::invalid_argument("grid and target dimension differ");
  if (grid.dim() < 1 || grid.dim() > 2) throw std::invalid_argument("grid must be 1-D or 2-D");
  if (subdivisions == 0) throw std::invalid_argument("subdivisions must be positive");
  const std::size_t kSub = subdivisions;
  const TargetDensity t = target.uncounted();
  const std::size_t cells = grid.cell_count();
  std::vector<double> log_mass(cells);
  std::vector<double> logs;
  Vector x(grid.dim());
  for (std::size_t cell = 0; cell < cells; ++cell) {
    std::size_t idx[2] = {cell, 0};
    if (grid.dim() == 2) idx[0] = cell / grid.bins[1], idx[1] = cell % grid.bins[1];
    logs.clear();
    const std::size_t sub_total = grid.dim() == 2 ? kSub * kSub : kSub;
    for (std::size_t s = 0; s < sub_total; ++s) {
      const std::size_t sub[2] = {grid.dim() == 2 ? s / kSub : s, s % kSub};
      for (std::size_t a = 0; a < grid.dim(); ++a) {
        const double width = (grid.upper[a] - grid.lower[a]) / static_cast<double>(grid.bins[a]);
        x[a] = grid.lower[a] + width * (static_cast<double>(idx[a]) +
                                        (static_cast<double>(sub[a]) + 0.5) / static_cast<double>(kSub));
      }
      logs.push_back(t.log_density(x));
    }
    log_mass[cell] = log_sum_exp(logs);
  }
  double top = -std::numeric_limits<double>::infinity();
  for (double v : log_mass) top = std::max(top, v);
  std::vector<double> mass(cells + 1, 0.0);
  double total = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    mass[c] = std::exp(log_mass[c] - top);
    total += mass[c];
  }
  for (std::size_t c = 0; c < cells; ++c) mass[c] /= total;
  return mass;
}

double grid_tv(std::span<const double> empirical, std::span<const double> quadrature) {
  if (empirical.size() != quadrature.size()) throw std::invalid_argument("mass vectors differ");
  double s = 0.0;
  // The last slot is the outside-grid mass; quadrature puts none there.
  for (std::size_t i = 0; i < empirical.size(); ++i) s += std::abs(empirical[i] - quadrature[i]);
  return 0.5 * s;
}

double grid_tv(const Trace& trace, const TargetDensity& target, const Grid& grid,
               std::size_t subdivisions) {
  return grid_tv(empirical_mass(trace, grid), quadrature_mass(target, grid, subdivisions));
}

// ---------------------------------------------------------------------------

EmbeddedChainReport embedded_chain_test(std::span<const BasicKktState<std::size_t>> trace,
                                        const Matrix& Q, const Subset& C, std::size_t z0) {
  const std::size_t m = C.size();
  std::vector<std::size_t> local(*std::max_element(C.begin(), C.end()) + 1, m);
  for (std::size_t k = 0; k < m; ++k) local[C[k]] = k;
  auto to_local = [&](std::size_t z) {
    if (z >= local.size() || local[z] == m) {
      throw std::invalid_argument("teleport anchor " + std::to_string(z) + " is not in C");
    }
    return local[z];
  };
  EmbeddedChainReport r;
  r.counts = Matrix::Zero(m, m);
  std::size_t prev = to_local(z0);
  for (const auto& s : trace) {
    if (!s.teleported) continue;
    const std::size_t next = to_local(s.z);
    r.counts(prev, next) += 1.0;
    ++r.events;
    prev = next;
  }
  r.underpowered = r.events < 100;
  r.empirical = Matrix::Zero(m, m);
  r.row_chi_square.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double row_total = r.counts.row(i).sum();
    if (row_total == 0.0) continue;
    r.empirical.row(i) = r.counts.row(i) / row_total;
    for (std::size_t j = 0; j < m; ++j) {
      r.max_deviation = std::max(r.max_deviation, std::abs(r.empirical(i, j) - Q(i, j)));
      const double expected = row_total * Q(i, j);
      if (expected > 0.0) {
        const double d = r.counts(i, j) - expected;
        r.row_chi_square[i] += d * d / expected;
      }
    }
  }
  return r;
}

}  // namespace kkt
