#pragma once

// The teleporting samplers instantiated on a finite state space, so their
// empirical behaviour can be compared with the exact oracle.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "kkt/discrete.hpp"
#include "kkt/sampler.hpp"

namespace kkt {

using FiniteState = BasicKktState<std::size_t>;

/// Transition rows stored contiguously for sampling.
class RowSampler {
 public:
  RowSampler() = default;
  explicit RowSampler(const Matrix& M) : rows_(M) {}

  std::size_t draw(std::size_t from, Rng& rng) const {
    return rng.categorical(std::span<const double>(rows_.row(static_cast<Eigen::Index>(from)).data(),
                                                   static_cast<std::size_t>(rows_.cols())));
  }
  double operator()(std::size_t x, std::size_t y) const { return rows_(x, y); }

 private:
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows_;
};

/// P on {0..n-1}, a region C, and a teleport kernel Q on C (|C| x |C|, in the
/// order of C).
struct FiniteKktModel {
  RowSampler P;
  RowSampler Q;
  Subset C;
  std::vector<bool> in_c;
  std::vector<std::size_t> local;  // state -> position in C (valid on C)

  FiniteKktModel(const DiscreteChain& chain, const Subset& region, const Matrix& q)
      : P(chain.P), Q(q), C(region), in_c(membership(chain.n(), region)), local(chain.n(), 0) {
    for (std::size_t k = 0; k < C.size(); ++k) local[C[k]] = k;
  }

  Move<std::size_t> base(std::size_t y, Rng& rng) const { return {P.draw(y, rng), true}; }
  Move<std::size_t> teleport(std::size_t z, Rng& rng) const {
    return {C[Q.draw(local[z], rng)], true};
  }
};

inline FiniteState finite_kkt_step(const FiniteKktModel& m, const FiniteState& s, Rng& rng) {
  return teleport_transition(
      s, [&m](std::size_t y, Rng& r) { return m.base(y, r); },
      [&m](std::size_t y) { return m.in_c[y] ? 1.0 : 0.0; },
      [&m](std::size_t z, Rng& r) { return m.teleport(z, r); }, rng);
}

/// Memoryless variant: teleports draw i.i.d. from pi_c (a law on C, in the
/// order of C).
inline FiniteState finite_memoryless_kkt_step(const FiniteKktModel& m,
                                              std::span<const double> pi_c, const FiniteState& s,
                                              Rng& rng) {
  return teleport_transition(
      s, [&m](std::size_t y, Rng& r) { return m.base(y, r); },
      [&m](std::size_t y) { return m.in_c[y] ? 1.0 : 0.0; },
      [&m, pi_c](std::size_t, Rng& r) { return Move<std::size_t>{m.C[r.categorical(pi_c)], true}; },
      rng);
}

/// Generalized trigger alpha over all states; Q given over C as above.
inline FiniteState finite_gkkt_step(const FiniteKktModel& m, std::span<const double> alpha,
                                    const FiniteState& s, Rng& rng) {
  return teleport_transition(
      s, [&m](std::size_t y, Rng& r) { return m.base(y, r); },
      [alpha](std::size_t y) { return alpha[y]; },
      [&m](std::size_t z, Rng& r) { return m.teleport(z, r); }, rng);
}

/// MH as a teleporting process with P = I: one proposal from K and one
/// uniform per step; success moves Y and Z together.
inline FiniteState finite_mh_gkkt_step(const RowSampler& K, const Matrix& alpha_tilde,
                                       const FiniteState& s, Rng& rng) {
  const std::size_t cand = K.draw(s.y, rng);
  const double u = rng.uniform();
  FiniteState next;
  next.step_index = s.step_index + 1;
  if (u < alpha_tilde(static_cast<Eigen::Index>(s.y), static_cast<Eigen::Index>(cand))) {
    next.y = next.z = cand;
    next.teleported = next.candidate_accepted = next.q_accepted = true;
  } else {
    next.y = s.y;
    next.z = s.z;
  }
  return next;
}

}  // namespace kkt
