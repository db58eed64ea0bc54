#pragma once

// Local Metropolis-Hastings kernels: random walk, Langevin and Hamiltonian.
//
// All kernels are stateless given (target, config). Acceptance is decided in
// log space: a candidate is accepted iff log(U) < log_alpha, U ~ U[0, 1).
// The uniform is drawn on every call, so each kernel consumes a fixed amount
// of randomness per step:
//   rwm   d normals + 1 uniform
//   mala  d normals + 1 uniform
//   hmc   d normals + 1 uniform
// Evaluations per step: rwm 2 densities; mala 2 densities + 2 gradients;
// hmc 2 densities + (n_hmc + 1) gradients. A candidate with zero density is
// rejected without evaluating its gradient.

#include <string>
#include <string_view>
#include <utility>

#include "kkt/rng.hpp"
#include "kkt/target.hpp"

namespace kkt {

enum class KernelKind { RWM, MALA, HMC };

std::string_view kernel_kind_name(KernelKind kind);

struct KernelConfig {
  KernelKind kind = KernelKind::RWM;
  double sigma = 1.0;    // RWM proposal standard deviation
  double gamma = 0.1;    // MALA step size
  double delta_t = 0.1;  // HMC leapfrog step
  int n_hmc = 10;        // HMC leapfrog steps per proposal

  static KernelConfig rwm(double sigma);
  static KernelConfig mala(double gamma);
  static KernelConfig hmc(double delta_t, int n_hmc);

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  std::string describe() const;
};

struct StepOutcome {
  Vector state;
  bool accepted = false;
  double log_alpha = 0.0;  // <= 0, or -inf
};

/// min(0, log pi(y) + log r(y, x) - log pi(x) - log r(x, y)); -inf when pi(y) = 0.
double mh_log_acceptance(const TargetDensity& target, double log_q_fwd, double log_q_bwd,
                         std::span<const double> x, std::span<const double> y);

/// The same rule from already evaluated log densities.
double mh_log_acceptance(double log_pi_x, double log_pi_y, double log_q_fwd, double log_q_bwd);

StepOutcome rwm_step(const TargetDensity& target, const KernelConfig& cfg,
                     std::span<const double> x, Rng& rng);

/// log r_gamma(x, y) for the Langevin proposal with drift grad_x = grad log pi(x).
double mala_log_proposal_density(std::span<const double> x, std::span<const double> grad_x,
                                 std::span<const double> y, double gamma);

StepOutcome mala_step(const TargetDensity& target, const KernelConfig& cfg,
                      std::span<const double> x, Rng& rng);

/// One position-velocity leapfrog step; returns (x', v').
std::pair<Vector, Vector> verlet_step(const TargetDensity& target, double delta_t,
                                      std::span<const double> x, std::span<const double> v);

StepOutcome hmc_step(const TargetDensity& target, const KernelConfig& cfg,
                     std::span<const double> x, Rng& rng);

/// Dispatches on cfg.kind.
StepOutcome base_step(const TargetDensity& target, const KernelConfig& cfg,
                      std::span<const double> x, Rng& rng);

}  // namespace kkt
