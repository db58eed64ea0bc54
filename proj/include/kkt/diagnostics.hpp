#pragma once

// Trace storage and the statistics computed from it: effective sample size,
// occupancy of regions, grid total-variation distance and the embedded
// teleport-chain test.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kkt/discrete.hpp"
#include "kkt/sampler.hpp"
#include "kkt/target.hpp"

namespace kkt {

/// Row-major n x dim matrix of chain points plus per-step flags.
struct Trace {
  std::size_t dim = 0;
  std::vector<std::uint64_t> step;
  std::vector<std::uint8_t> teleported;
  std::vector<std::uint8_t> accepted;
  std::vector<double> values;

  explicit Trace(std::size_t d = 0) : dim(d) {}

  std::size_t size() const { return step.size(); }
  std::span<const double> point(std::size_t i) const { return {values.data() + i * dim, dim}; }
  Vector column(std::size_t j) const;
  void push(const KktState& s);
  void push(std::uint64_t step_index, bool tele, bool acc, std::span<const double> x);
  void reserve(std::size_t n);
};

// ---------------------------------------------------------------------------
// Effective sample size

struct EssResult {
  double ess = 0.0;
  double tau = 0.0;         // integrated autocorrelation time estimate
  bool degenerate = false;  // constant series: ess = 0
  bool clipped = false;     // tau < 1: ess clipped to n
};

/// Geyer initial-positive-sequence estimator with FFT autocovariances.
/// Throws std::invalid_argument for series shorter than 100.
EssResult ess(std::span<const double> series);

struct Spread {
  double mean = 0.0;
  double variance = 0.0;  // population variance over coordinates
  double min = 0.0;
  double max = 0.0;
};

Spread spread(std::span<const double> v);

struct EssReport {
  std::vector<double> per_coordinate_ess;
  std::vector<double> ess_per_eval;          // ESS / (density + gradient evaluations per step)
  std::vector<double> ess_per_density_eval;  // ESS / (density evaluations per step)
  std::vector<double> ess_per_grad_eval;     // empty when no gradients were evaluated
  std::vector<std::size_t> degenerate_coordinates;
  std::vector<std::size_t> clipped_coordinates;
  Spread ess_spread;
  Spread per_eval_spread;
  Spread per_density_spread;
  Spread per_grad_spread;
};

/// Per-coordinate ESS of the trace; evaluation counts are totals over it.
EssReport ess_report(const Trace& trace, std::uint64_t density_evals, std::uint64_t grad_evals);

// ---------------------------------------------------------------------------
// Occupancy and distributional distance

struct TraceSummary {
  std::uint64_t n_steps = 0;
  std::uint64_t n_teleports = 0;
  double teleport_fraction = 0.0;
  double base_accept_rate = 0.0;
  double q_accept_rate = 0.0;  // over teleport events; 0 when there were none
  std::uint64_t density_evals = 0;
  std::uint64_t grad_evals = 0;
  std::uint64_t seed = 0;
};

TraceSummary summarize(const ChainSummary& chain, std::uint64_t seed);

/// Fraction of trace points inside each region.
std::vector<double> mode_weights(const Trace& trace, const std::vector<CriticalRegion>& parts);

/// Axis-aligned grid with equal bins, in one or two dimensions.
struct Grid {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::size_t> bins;

  std::size_t dim() const { return bins.size(); }
  std::size_t cell_count() const;
  /// Flat cell index (last axis fastest), or cell_count() when outside.
  std::size_t cell_of(std::span<const double> x) const;
  double edge(std::size_t axis, std::size_t i) const;
};

/// Per-cell empirical mass; element cell_count() holds the mass outside.
std::vector<double> empirical_mass(const Trace& trace, const Grid& grid,
                                   std::span<const std::size_t> coords = {});

/// Per-cell mass of the target normalized over the grid, by the midpoint
/// rule on `subdivisions` sub-intervals per axis. Densities with a jump
/// inside a cell (a target restricted to a region) need a fine subgrid.
std::vector<double> quadrature_mass(const TargetDensity& target, const Grid& grid,
                                    std::size_t subdivisions = 10);

/// 1/2 sum |empirical - quadrature| over cells, plus the empirical mass outside.
double grid_tv(const Trace& trace, const TargetDensity& target, const Grid& grid,
               std::size_t subdivisions = 10);
double grid_tv(std::span<const double> empirical, std::span<const double> quadrature);

// ---------------------------------------------------------------------------
// Embedded teleport chain

struct EmbeddedChainReport {
  std::uint64_t events = 0;
  bool underpowered = false;  // fewer than 100 teleport events
  Matrix counts;              // |C| x |C|, in the order of C
  Matrix empirical;
  double max_deviation = 0.0;          // over rows with at least one event
  std::vector<double> row_chi_square;  // sum (O - E)^2 / E over cells with E > 0
};

/// Tabulates Z-transitions at teleport steps. z0 is the anchor before the
/// first emitted state.
EmbeddedChainReport embedded_chain_test(std::span<const BasicKktState<std::size_t>> trace,
                                        const Matrix& Q, const Subset& C, std::size_t z0);

}  // namespace kkt
