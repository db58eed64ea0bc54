#pragma once

// Teleporting samplers: memoryless KKT, KKT, general KKT (indicator or
// probabilistic trigger), memoryless GKKT, and Metropolis-Hastings written as
// a GKKT process.
//
// Randomness order within one step is fixed:
//   1. base kernel draws (proposal, then its accept uniform),
//   2. the trigger draw B ~ Bernoulli(alpha(Y*)), skipped when alpha is 0 or 1,
//   3. teleport draws (Q kernel or exact re-entry sampler).
// With alpha an indicator, gkkt_step therefore consumes exactly the
// randomness kkt_step does and the two produce identical traces.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kkt/kernels.hpp"
#include "kkt/rng.hpp"
#include "kkt/target.hpp"

namespace kkt {

/// Chain state (Y_k, Z_k) plus metadata of the step that produced it.
/// Invariants: teleported implies y == z; !teleported implies z is the
/// previous state's z.
template <class S>
struct BasicKktState {
  S y{};
  S z{};
  std::uint64_t step_index = 0;
  bool teleported = false;
  bool candidate_accepted = false;  // base kernel accepted its proposal
  bool q_accepted = false;          // teleport move accepted; false unless teleported
};

using KktState = BasicKktState<Vector>;

/// Y_0 = Z_0 = z0.
template <class S>
BasicKktState<S> initial_state(S z0) {
  BasicKktState<S> s;
  s.y = z0;
  s.z = std::move(z0);
  return s;
}

template <class S>
struct Move {
  S state;
  bool accepted = false;
};

/// The GKKT transition skeleton shared by every sampler in this header and by
/// the finite-state instantiations.
///   base(y, rng)     -> Move<S>   draw Y* ~ P(y, .)
///   alpha(y*)        -> [0, 1]    teleport probability
///   teleport(z, rng) -> Move<S>   draw Z' ~ Q(z, .)
template <class S, class Base, class Alpha, class Teleport>
BasicKktState<S> teleport_transition(const BasicKktState<S>& cur, Base&& base, Alpha&& alpha,
                                     Teleport&& teleport, Rng& rng) {
  Move<S> cand = base(cur.y, rng);
  BasicKktState<S> next;
  next.step_index = cur.step_index + 1;
  next.candidate_accepted = cand.accepted;
  if (!rng.bernoulli(alpha(cand.state))) {
    next.y = std::move(cand.state);
    next.z = cur.z;
    return next;
  }
  Move<S> moved = teleport(cur.z, rng);
  next.z = std::move(moved.state);
  next.y = next.z;
  next.teleported = true;
  next.q_accepted = moved.accepted;
  return next;
}

// ---------------------------------------------------------------------------
// Exact re-entry by accept-reject

inline constexpr std::uint64_t kDefaultRejectionCap = 10'000'000;

struct RejectionStats {
  std::uint64_t draws = 0;
  std::uint64_t rejections = 0;
  std::uint64_t accepts = 0;

  double mean_rejections_per_accept() const {
    return static_cast<double>(rejections) / static_cast<double>(std::max<std::uint64_t>(1, accepts));
  }
};

class RejectionCapExceeded : public std::runtime_error {
 public:
  RejectionCapExceeded(const std::string& what, RejectionStats stats)
      : std::runtime_error(what), stats_(stats) {}
  const RejectionStats& stats() const { return stats_; }

 private:
  RejectionStats stats_;
};

/// One exact draw from pi restricted to the envelope set: x ~ q accepted with
/// probability 1_C(x) pi(x) / (c q(x)). Trial counts are added to `stats`.
/// Per trial: the instrumental's draws, then one uniform.
Vector rejection_sample_pi_c(const EnvelopeRegion& region, const TargetDensity& target, Rng& rng,
                             std::uint64_t max_trials, RejectionStats& stats);

/// One exact draw from the density proportional to min(c phi, pi): x ~ phi
/// accepted with probability min(1, pi(x) / (c phi(x))).
Vector rejection_sample_min_envelope(const TargetDensity& target, const Instrumental& phi,
                                     double log_c, Rng& rng, std::uint64_t max_trials,
                                     RejectionStats& stats);

/// alpha(x) = min(1, c phi(x) / pi(x)), the trigger matching the re-entry law above.
AlphaFunction alpha_min_envelope(const TargetDensity& target, const Instrumental& phi, double log_c);

// ---------------------------------------------------------------------------
// Teleport specification and single steps

struct TeleportSpec {
  enum class Mode { ExactPiC, KernelQ };

  Mode mode = Mode::KernelQ;
  CriticalRegion region;
  std::optional<EnvelopeRegion> envelope;  // required for ExactPiC
  KernelConfig q;                          // used by KernelQ
  std::uint64_t max_trials = kDefaultRejectionCap;

  static TeleportSpec exact(const EnvelopeRegion& envelope,
                            std::uint64_t max_trials = kDefaultRejectionCap);
  static TeleportSpec kernel(CriticalRegion region, KernelConfig q);
};

/// Algorithm: base step; if the candidate is outside C keep it, otherwise
/// replace it by an exact pi_C draw.
KktState memoryless_kkt_step(const TargetDensity& target, const KernelConfig& base,
                             const TeleportSpec& spec, const KktState& state, Rng& rng,
                             RejectionStats* stats = nullptr);

/// Base step; if the candidate is in C, Z moves by an MH kernel targeting
/// 1_C pi and Y jumps to the new Z.
KktState kkt_step(const TargetDensity& target, const KernelConfig& base,
                  const KernelConfig& q_kernel, const CriticalRegion& region,
                  const KktState& state, Rng& rng);

/// As kkt_step with the trigger B ~ Bernoulli(alpha(Y*)) and Q targeting
/// tilde_target (density proportional to alpha pi). Throws std::logic_error
/// if Q ever moves Z to a point with alpha = 0.
KktState gkkt_step(const TargetDensity& target, const KernelConfig& base,
                   const KernelConfig& q_kernel, const AlphaFunction& alpha,
                   const TargetDensity& tilde_target, const KktState& state, Rng& rng);

/// As gkkt_step with alpha = min(1, c phi / pi) and the Q move replaced by an
/// independent exact draw from the density proportional to min(c phi, pi).
KktState memoryless_gkkt_step(const TargetDensity& target, const KernelConfig& base,
                              const Instrumental& phi, double log_c, const KktState& state,
                              Rng& rng, std::uint64_t max_trials = kDefaultRejectionCap,
                              RejectionStats* stats = nullptr);

/// memoryless_gkkt_step with a prebuilt alpha_min_envelope(target, phi, log_c).
KktState memoryless_gkkt_step_with(const TargetDensity& target, const KernelConfig& base,
                                   const Instrumental& phi, double log_c,
                                   const AlphaFunction& alpha, const KktState& state, Rng& rng,
                                   std::uint64_t max_trials, RejectionStats* stats);

/// Metropolis-Hastings as a GKKT process: P is the identity, and the trigger
/// together with the Q_alpha draw is realized by one proposal and accept
/// test. teleported == candidate_accepted == "the proposal was accepted".
KktState mh_gkkt_step(const TargetDensity& target, const KernelConfig& proposal,
                      const KktState& state, Rng& rng);

/// n steps of mh_gkkt_step from x0; returns the emitted states.
std::vector<KktState> mh_as_gkkt_chain(const TargetDensity& target, const KernelConfig& proposal,
                                       std::uint64_t n, std::span<const double> x0, Rng& rng);

// ---------------------------------------------------------------------------
// Steppers: a step function with its arguments bound and per-run
// precomputation done once.

using Stepper = std::function<KktState(const KktState&, Rng&)>;

/// Plain base-kernel chain; teleported is always false and z stays put.
Stepper make_base_stepper(TargetDensity target, KernelConfig base);

Stepper make_memoryless_kkt_stepper(TargetDensity target, KernelConfig base, TeleportSpec spec,
                                    std::shared_ptr<RejectionStats> stats);

Stepper make_kkt_stepper(TargetDensity target, KernelConfig base, KernelConfig q_kernel,
                         CriticalRegion region);

Stepper make_gkkt_stepper(TargetDensity target, KernelConfig base, KernelConfig q_kernel,
                          AlphaFunction alpha, TargetDensity tilde_target);

Stepper make_memoryless_gkkt_stepper(TargetDensity target, KernelConfig base, Instrumental phi,
                                     double log_c, std::uint64_t max_trials,
                                     std::shared_ptr<RejectionStats> stats);

Stepper make_mh_gkkt_stepper(TargetDensity target, KernelConfig proposal);

// ---------------------------------------------------------------------------
// Driving a chain

struct ChainSummary {
  std::uint64_t n_steps = 0;
  std::uint64_t n_teleports = 0;
  std::uint64_t n_base_accepts = 0;
  std::uint64_t n_q_accepts = 0;
  std::uint64_t density_evals = 0;
  std::uint64_t grad_evals = 0;
  double wall_seconds = 0.0;
};

class SinkError : public std::runtime_error {
 public:
  SinkError(std::uint64_t step_index, const std::string& what)
      : std::runtime_error("trace sink failed at step " + std::to_string(step_index) + ": " + what),
        step_index_(step_index) {}
  std::uint64_t step_index() const { return step_index_; }

 private:
  std::uint64_t step_index_;
};

/// Applies `step` n times to `state` (updated in place), passing every new
/// state to `sink`. Evaluation counts are the change in *counts over the run.
template <class S, class Step, class Sink>
ChainSummary run_chain(Step&& step, std::uint64_t n, BasicKktState<S>& state, Rng& rng,
                       Sink&& sink, const EvalCounts* counts = nullptr) {
  if (n == 0) throw std::invalid_argument("run_chain needs n >= 1");
  ChainSummary summary;
  const EvalCounts before = counts ? *counts : EvalCounts{};
  const auto t0 = std::chrono::steady_clock::now();
  for (std::uint64_t i = 0; i < n; ++i) {
    state = step(state, rng);
    ++summary.n_steps;
    summary.n_teleports += state.teleported;
    summary.n_base_accepts += state.candidate_accepted;
    summary.n_q_accepts += state.q_accepted;
    try {
      sink(state);
    } catch (const std::exception& e) {
      throw SinkError(state.step_index, e.what());
    }
  }
  summary.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (counts) {
    summary.density_evals = counts->density - before.density;
    summary.grad_evals = counts->gradient - before.gradient;
  }
  return summary;
}

}  // namespace kkt
