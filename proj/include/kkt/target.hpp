#pragma once

// Target densities, critical regions and teleport-probability functions.

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kkt/rng.hpp"

namespace kkt {

/// Evaluation counters attached to a target view. Not thread safe; one per chain.
struct EvalCounts {
  std::uint64_t density = 0;
  std::uint64_t gradient = 0;
};

/// Unnormalized log-density with hand-coded gradient on R^d. Immutable and
/// cheap to copy; copies share the underlying functions.
class TargetDensity {
 public:
  using LogDensityFn = std::function<double(std::span<const double>)>;
  using GradientFn = std::function<void(std::span<const double>, std::span<double>)>;

  TargetDensity(std::size_t dim, std::string label, LogDensityFn log_density, GradientFn gradient);

  std::size_t dim() const { return dim_; }
  const std::string& label() const { return label_; }

  double log_density(std::span<const double> x) const {
    if (counts_) ++counts_->density;
    return (*log_density_)(x);
  }

  void grad_log_density(std::span<const double> x, std::span<double> out) const {
    if (counts_) ++counts_->gradient;
    (*gradient_)(x, out);
  }

  Vector grad_log_density(std::span<const double> x) const {
    Vector g(dim_);
    grad_log_density(x, g);
    return g;
  }

  /// A view of this target whose evaluations are tallied into `counts`.
  /// The caller keeps `counts` alive for as long as the view is used.
  TargetDensity counted(EvalCounts& counts) const;

  /// The same target without any attached counter.
  TargetDensity uncounted() const;

 private:
  std::size_t dim_;
  std::string label_;
  std::shared_ptr<const LogDensityFn> log_density_;
  std::shared_ptr<const GradientFn> gradient_;
  EvalCounts* counts_ = nullptr;
};

/// The teleport-triggering set, as a pure membership predicate.
struct CriticalRegion {
  std::function<bool(std::span<const double>)> contains;
  std::string description;
};

/// Teleport probability in [0, 1].
class AlphaFunction {
 public:
  AlphaFunction(std::function<double(std::span<const double>)> alpha, std::string description);

  /// Always within [0, 1]; out-of-range raw values are clamped and counted.
  double operator()(std::span<const double> x) const;

  const std::string& description() const { return description_; }
  std::uint64_t clamp_events() const { return clamp_events_->load(std::memory_order_relaxed); }

 private:
  std::function<double(std::span<const double>)> alpha_;
  std::string description_;
  std::shared_ptr<std::atomic<std::uint64_t>> clamp_events_;
};

/// Axis-aligned box [lower, upper].
struct Box {
  Vector lower;
  Vector upper;

  static Box cube(std::size_t dim, double lo, double hi);
  std::size_t dim() const { return lower.size(); }
  bool contains(std::span<const double> x) const;
  double log_volume() const;
  Vector sample_uniform(Rng& rng) const;
};

/// Instrumental density for accept-reject sampling: a log density and an
/// exact sampler for it.
struct Instrumental {
  std::function<double(std::span<const double>)> log_density;
  std::function<Vector(Rng&)> sample;
  std::string description;
};

Instrumental uniform_instrumental(const Box& box);

/// C = {x in box : log pi(x) <= log_c + log q(x)} together with everything
/// needed to draw exactly from pi restricted to C by accept-reject.
struct EnvelopeRegion {
  TargetDensity target;
  Instrumental instrumental;
  double log_c;
  Box box;

  bool contains(std::span<const double> x) const;
  CriticalRegion region() const;
};

// ---------------------------------------------------------------------------
// Regions and alpha functions

/// contains(x) iff -log pi(x) > threshold (strict; the boundary is outside).
CriticalRegion level_set_region(const TargetDensity& target, double threshold);

EnvelopeRegion envelope_region(const TargetDensity& target, Instrumental instrumental,
                               double log_c, Box box);

/// pi restricted to the region: log density -inf outside it.
TargetDensity restrict_to(const TargetDensity& target, const CriticalRegion& region);

/// alpha = 1_C exactly.
AlphaFunction alpha_indicator(const CriticalRegion& region);

/// alpha(x) = exp(log tilde_u(x) - log pi_u(x) - log_Mu), clamped to [0, 1].
AlphaFunction alpha_from_unnormalized(const TargetDensity& target_unnorm,
                                      const TargetDensity& tilde_unnorm, double log_Mu);

// ---------------------------------------------------------------------------
// Experimental targets

/// Equal mixture of N((10,0), I) and N((-10,0), I); normalized.
TargetDensity bimodal_target();

using Point2 = std::array<double, 2>;

/// Centre of the light-tailed quartic component.
inline constexpr Point2 kQuarticCentre{-7.0, -6.5};
/// Integral of exp(-s^4) over R, i.e. 2 Gamma(5/4).
double quartic_normalizer();

/// Non-canonical default list of the 14 Gaussian centres (the published figure
/// gives no coordinates).
std::vector<Point2> default_fifteen_modes();

/// 14 unit Gaussians with weight 1/14.8 each plus a quartic component with
/// weight 0.8/14.8 at kQuarticCentre; normalized.
TargetDensity fifteen_mode_target(const std::vector<Point2>& modes);

/// Index of the component with the largest weighted density at x: 0..13 for
/// the Gaussians (in input order), 14 for the quartic component.
std::size_t fifteen_mode_component(const std::vector<Point2>& modes, std::span<const double> x);

/// Stochastic volatility posterior over (alpha, beta, z_0..z_N), constant dropped.
TargetDensity stochastic_volatility_target(std::vector<double> observations);

/// Observations y_0..y_{n-1} simulated with (tau, rho, z) drawn from the priors.
std::vector<double> simulate_sv_observations(std::size_t n, std::uint64_t seed);

struct GinzburgLandauParams {
  std::size_t side = 5;
  double tau = 2.0;
  double lambda = 0.5;
  double alpha = 0.1;
};

/// Periodic p^3 lattice field, constant dropped.
TargetDensity ginzburg_landau_target(const GinzburgLandauParams& params);

/// Equal-weight mixture of unit-covariance Gaussians; normalized.
TargetDensity gaussian_mixture_target(const std::vector<Vector>& centres, std::string label);

TargetDensity standard_normal_target(std::size_t dim);

/// Constant log density (zero gradient).
TargetDensity flat_target(std::size_t dim);

// ---------------------------------------------------------------------------
// Data files

/// One real per line under the header "y".
std::vector<double> read_observations_csv(const std::filesystem::path& path);
void write_observations_csv(const std::filesystem::path& path, std::span<const double> ys);

/// Columns "x1,x2".
std::vector<Point2> read_modes_csv(const std::filesystem::path& path);

/// Columns "x1,...,xd" (any dimension).
std::vector<Vector> read_centres_csv(const std::filesystem::path& path);

class DataFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kkt
