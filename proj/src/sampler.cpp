#include "kkt/sampler.hpp"

#include <cmath>

#include "kkt/numeric.hpp"

namespace kkt {

Vector rejection_sample_pi_c(const EnvelopeRegion& region, const TargetDensity& target, Rng& rng,
                             std::uint64_t max_trials, RejectionStats& stats) {
  for (std::uint64_t trial = 0; trial < max_trials; ++trial) {
    Vector x = region.instrumental.sample(rng);
    const double u = rng.uniform();
    ++stats.draws;
    if (region.box.contains(x)) {
      const double log_pi = target.log_density(x);
      const double log_cq = region.log_c + region.instrumental.log_density(x);
      // x in C iff pi(x) <= c q(x); then accept with probability pi / (c q).
      if (log_pi <= log_cq && std::log(u) < log_pi - log_cq) {
        ++stats.accepts;
        return x;
      }
    }
    ++stats.rejections;
  }
  throw RejectionCapExceeded("rejection sampler for pi_C exceeded " + std::to_string(max_trials) +
                                 " trials; the envelope is likely mis-specified",
                             stats);
}

Vector rejection_sample_min_envelope(const TargetDensity& target, const Instrumental& phi,
                                     double log_c, Rng& rng, std::uint64_t max_trials,
                                     RejectionStats& stats) {
  for (std::uint64_t trial = 0; trial < max_trials; ++trial) {
    Vector x = phi.sample(rng);
    const double u = rng.uniform();
    ++stats.draws;
    const double log_ratio = target.log_density(x) - log_c - phi.log_density(x);
    if (std::log(u) < std::min(0.0, log_ratio)) {
      ++stats.accepts;
      return x;
    }
    ++stats.rejections;
  }
  throw RejectionCapExceeded("re-entry sampler exceeded " + std::to_string(max_trials) + " trials",
                             stats);
}

AlphaFunction alpha_min_envelope(const TargetDensity& target, const Instrumental& phi,
                                 double log_c) {
  TargetDensity t = target.uncounted();
  return AlphaFunction(
      [t, phi, log_c](std::span<const double> x) {
        const double log_cphi = log_c + phi.log_density(x);
        if (log_cphi == kNegInf) return 0.0;
        return std::exp(std::min(0.0, log_cphi - t.log_density(x)));
      },
      "min(1, c phi / pi), phi = " + phi.description);
}

TeleportSpec TeleportSpec::exact(const EnvelopeRegion& envelope, std::uint64_t max_trials) {
  TeleportSpec spec;
  spec.mode = Mode::ExactPiC;
  spec.region = envelope.region();
  spec.envelope = envelope;
  spec.max_trials = max_trials;
  return spec;
}

TeleportSpec TeleportSpec::kernel(CriticalRegion region, KernelConfig q) {
  TeleportSpec spec;
  spec.mode = Mode::KernelQ;
  spec.region = std::move(region);
  spec.q = q;
  return spec;
}

namespace {

auto base_move(const TargetDensity& target, const KernelConfig& base) {
  return [&target, &base](const Vector& y, Rng& rng) {
    StepOutcome out = base_step(target, base, y, rng);
    return Move<Vector>{std::move(out.state), out.accepted};
  };
}

auto indicator(const CriticalRegion& region) {
  return [&region](const Vector& y) { return region.contains(y) ? 1.0 : 0.0; };
}

KktState kkt_step_restricted(const TargetDensity& target, const KernelConfig& base,
                             const KernelConfig& q_kernel, const CriticalRegion& region,
                             const TargetDensity& restricted, const KktState& state, Rng& rng) {
  return teleport_transition(
      state, base_move(target, base), indicator(region),
      [&](const Vector& z, Rng& r) {
        StepOutcome out = base_step(restricted, q_kernel, z, r);
        return Move<Vector>{std::move(out.state), out.accepted};
      },
      rng);
}

}  // namespace

KktState memoryless_kkt_step(const TargetDensity& target, const KernelConfig& base,
                             const TeleportSpec& spec, const KktState& state, Rng& rng,
                             RejectionStats* stats) {
  if (spec.mode != TeleportSpec::Mode::ExactPiC || !spec.envelope) {
    throw std::invalid_argument("memoryless KKT needs an exact pi_C teleport (envelope region)");
  }
  RejectionStats local;
  RejectionStats& tally = stats ? *stats : local;
  return teleport_transition(
      state, base_move(target, base), indicator(spec.region),
      [&](const Vector&, Rng& r) {
        return Move<Vector>{rejection_sample_pi_c(*spec.envelope, target, r, spec.max_trials, tally),
                            true};
      },
      rng);
}

KktState kkt_step(const TargetDensity& target, const KernelConfig& base,
                  const KernelConfig& q_kernel, const CriticalRegion& region,
                  const KktState& state, Rng& rng) {
  return kkt_step_restricted(target, base, q_kernel, region, restrict_to(target, region), state,
                             rng);
}

KktState gkkt_step(const TargetDensity& target, const KernelConfig& base,
                   const KernelConfig& q_kernel, const AlphaFunction& alpha,
                   const TargetDensity& tilde_target, const KktState& state, Rng& rng) {
  return teleport_transition(
      state, base_move(target, base), [&alpha](const Vector& y) { return alpha(y); },
      [&](const Vector& z, Rng& r) {
        StepOutcome out = base_step(tilde_target, q_kernel, z, r);
        if (out.accepted && !(alpha(out.state) > 0.0)) {
          throw std::logic_error("teleport kernel moved Z to a point with alpha = 0");
        }
        return Move<Vector>{std::move(out.state), out.accepted};
      },
      rng);
}

KktState memoryless_gkkt_step(const TargetDensity& target, const KernelConfig& base,
                              const Instrumental& phi, double log_c, const KktState& state,
                              Rng& rng, std::uint64_t max_trials, RejectionStats* stats) {
  return memoryless_gkkt_step_with(target, base, phi, log_c, alpha_min_envelope(target, phi, log_c),
                                   state, rng, max_trials, stats);
}

KktState memoryless_gkkt_step_with(const TargetDensity& target, const KernelConfig& base,
                                   const Instrumental& phi, double log_c,
                                   const AlphaFunction& alpha, const KktState& state, Rng& rng,
                                   std::uint64_t max_trials, RejectionStats* stats) {
  RejectionStats local;
  RejectionStats& tally = stats ? *stats : local;
  return teleport_transition(
      state, base_move(target, base), [&alpha](const Vector& y) { return alpha(y); },
      [&](const Vector&, Rng& r) {
        return Move<Vector>{rejection_sample_min_envelope(target, phi, log_c, r, max_trials, tally),
                            true};
      },
      rng);
}

KktState mh_gkkt_step(const TargetDensity& target, const KernelConfig& proposal,
                      const KktState& state, Rng& rng) {
  // Y* = Y (identity base kernel). One proposal plus accept test succeeds
  // with probability alpha_MH(Y) and, given success, lands Q_alpha-distributed.
  StepOutcome out = base_step(target, proposal, state.y, rng);
  KktState next;
  next.step_index = state.step_index + 1;
  if (out.accepted) {
    next.z = std::move(out.state);
    next.y = next.z;
    next.teleported = true;
    next.candidate_accepted = true;
    next.q_accepted = true;
  } else {
    next.y = state.y;
    next.z = state.z;
  }
  return next;
}

std::vector<KktState> mh_as_gkkt_chain(const TargetDensity& target, const KernelConfig& proposal,
                                       std::uint64_t n, std::span<const double> x0, Rng& rng) {
  std::vector<KktState> trace;
  trace.reserve(n);
  KktState s = initial_state(Vector(x0.begin(), x0.end()));
  for (std::uint64_t i = 0; i < n; ++i) {
    s = mh_gkkt_step(target, proposal, s, rng);
    trace.push_back(s);
  }
  return trace;
}

Stepper make_base_stepper(TargetDensity target, KernelConfig base) {
  return [target, base](const KktState& s, Rng& rng) {
    StepOutcome out = base_step(target, base, s.y, rng);
    KktState next;
    next.step_index = s.step_index + 1;
    next.y = std::move(out.state);
    next.z = s.z;
    next.candidate_accepted = out.accepted;
    return next;
  };
}

Stepper make_memoryless_kkt_stepper(TargetDensity target, KernelConfig base, TeleportSpec spec,
                                    std::shared_ptr<RejectionStats> stats) {
  if (!stats) stats = std::make_shared<RejectionStats>();
  return [target, base, spec, stats](const KktState& s, Rng& rng) {
    return memoryless_kkt_step(target, base, spec, s, rng, stats.get());
  };
}

Stepper make_kkt_stepper(TargetDensity target, KernelConfig base, KernelConfig q_kernel,
                         CriticalRegion region) {
  TargetDensity restricted = restrict_to(target, region);
  return [target, base, q_kernel, region, restricted](const KktState& s, Rng& rng) {
    return kkt_step_restricted(target, base, q_kernel, region, restricted, s, rng);
  };
}

Stepper make_gkkt_stepper(TargetDensity target, KernelConfig base, KernelConfig q_kernel,
                          AlphaFunction alpha, TargetDensity tilde_target) {
  return [target, base, q_kernel, alpha, tilde_target](const KktState& s, Rng& rng) {
    return gkkt_step(target, base, q_kernel, alpha, tilde_target, s, rng);
  };
}

Stepper make_memoryless_gkkt_stepper(TargetDensity target, KernelConfig base, Instrumental phi,
                                     double log_c, std::uint64_t max_trials,
                                     std::shared_ptr<RejectionStats> stats) {
  if (!stats) stats = std::make_shared<RejectionStats>();
  AlphaFunction alpha = alpha_min_envelope(target, phi, log_c);
  return [target, base, phi, log_c, alpha, max_trials, stats](const KktState& s, Rng& rng) {
    return memoryless_gkkt_step_with(target, base, phi, log_c, alpha, s, rng, max_trials,
                                     stats.get());
  };
}

Stepper make_mh_gkkt_stepper(TargetDensity target, KernelConfig proposal) {
  return [target, proposal](const KktState& s, Rng& rng) {
    return mh_gkkt_step(target, proposal, s, rng);
  };
}

}  // namespace kkt
