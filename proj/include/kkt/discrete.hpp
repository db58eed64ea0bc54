#pragma once

// Exact finite-state oracle: stationary laws, Kac excursion measures, the
// kernels the teleporting samplers induce, and the certificates behind
// geometric ergodicity. All linear algebra is dense; intended for chains with
// at most a few hundred states.

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kkt/rng.hpp"

namespace kkt {

using Matrix = Eigen::MatrixXd;
using EVector = Eigen::VectorXd;

/// Sorted, duplicate-free state indices.
using Subset = std::vector<std::size_t>;

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-stochastic transition matrix on states 0..n-1.
struct DiscreteChain {
  Matrix P;
  std::vector<std::string> labels;  // empty means "0".."n-1"

  std::size_t n() const { return static_cast<std::size_t>(P.rows()); }

  /// Throws OracleError naming the first bad row (negative entry or row sum
  /// off by more than tol).
  void validate(double tol = 1e-12) const;
};

DiscreteChain make_chain(Matrix P);

/// Indicator of `C` as a 0/1 vector of length n.
std::vector<bool> membership(std::size_t n, const Subset& C);
Subset complement(std::size_t n, const Subset& C);

// ---------------------------------------------------------------------------
// Stationary distribution and harmonic functions

struct StationaryResult {
  EVector pi;
  bool unique = true;     // false: the 1-eigenspace has dimension > 1
  double residual = 0.0;  // max |pi P - pi|
};

/// Solves pi (P - I) = 0 with one equation replaced by sum(pi) = 1. When the
/// solution is not unique, pi is the Cesaro average of uniform P^k and the
/// result is flagged. Throws OracleError if the residual exceeds 1e-8.
StationaryResult stationary_distribution(const DiscreteChain& chain);

/// Power-iteration cross-check of the stationary distribution from the
/// uniform law. Converges only for aperiodic chains.
EVector stationary_by_power_iteration(const DiscreteChain& chain, int iterations = 100000);

/// dim {h : P h = h} = n - rank(P - I), rank at relative tolerance 1e-9.
std::size_t harmonic_dimension(const Matrix& P);

// ---------------------------------------------------------------------------
// Kac measures

/// Taboo matrix: P with the columns of C zeroed.
Matrix taboo_matrix(const Matrix& P, const Subset& C);

/// Spectral radius of a square matrix.
double spectral_radius(const Matrix& A);

struct KacResult {
  double pi0 = 0.0;  // sum_{x in C} pi(x) E_x[sum_{k=0}^{sigma_C - 1} f(X_k)]
  double pi1 = 0.0;  // sum_{x in C} pi(x) E_x[sum_{k=1}^{sigma_C} f(X_k)]
  bool finite = true;  // false: C is not reached from some state
};

KacResult kac_measures(const DiscreteChain& chain, const EVector& pi, const Subset& C,
                       const EVector& f);

struct GeneralizedKacResult {
  double value = 0.0;
  bool finite = true;
};

/// sum_x pi(x) alpha(x) [f(x) + ((I - Pt)^{-1} Pt f)(x)], Pt(x, y) = P(x, y)(1 - alpha(y)).
GeneralizedKacResult generalized_kac(const DiscreteChain& chain, const EVector& pi,
                                     const EVector& alpha, const EVector& f);

// ---------------------------------------------------------------------------
// Memoryless kernel and reversibility

/// S(y, y') = P(y, y') 1_{C^c}(y') + P(y, C) pi_C(y').
DiscreteChain build_memoryless_kernel(const DiscreteChain& chain, const EVector& pi,
                                      const Subset& C);

struct ReversibilityReport {
  bool cond_a = false;  // pi (x) P symmetric on C^c x C^c
  bool cond_b = false;  // rows P(y, .) on C^c equal for all y in C with pi(y) > 0
  bool s_reversible = false;
  double worst_a = 0.0;
  double worst_b = 0.0;
  double worst_s = 0.0;

  bool criterion() const { return cond_a && cond_b; }
  bool consistent() const { return criterion() == s_reversible; }
};

ReversibilityReport check_reversibility_criterion(const DiscreteChain& chain, const EVector& pi,
                                                  const Subset& C, double tol = 1e-10);

/// max_{x,y} |pi(x) K(x, y) - pi(y) K(y, x)|
double detailed_balance_residual(const Matrix& K, const EVector& pi);

// ---------------------------------------------------------------------------
// KKT kernel on pairs (y, z), z in C

struct DiscreteKktKernel {
  Subset C;
  std::size_t n = 0;  // size of the underlying state space
  Matrix R;           // rows / columns indexed by pair_index(y, k)

  std::size_t size() const { return n * C.size(); }
  /// Pair (y, C[k]) -> row index y |C| + k.
  std::size_t pair_index(std::size_t y, std::size_t k) const { return y * C.size() + k; }
  std::pair<std::size_t, std::size_t> pair_of(std::size_t index) const {
    return {index / C.size(), C[index % C.size()]};
  }
};

/// R((y,z),(y',z')) = P(y,y') 1_{C^c}(y') 1_{z'=z} + P(y,C) Q(z,z') 1_{y'=z'}.
/// Q is |C| x |C| in the order of C.
DiscreteKktKernel build_kkt_kernel(const DiscreteChain& chain, const Subset& C, const Matrix& Q);

/// pi~(y, x) = pi(x) N(x, y) with N the expected visits to y before the
/// return to C, started at x in C. Indexed like DiscreteKktKernel. Throws
/// OracleError when C is not accessible.
EVector kkt_stationary(const DiscreteChain& chain, const EVector& pi, const Subset& C,
                       const Matrix& Q);

// ---------------------------------------------------------------------------
// Drift and minorization certificates

struct DriftCertificate {
  EVector V;
  double lambda = 0.0;
  double b = 0.0;
  Subset set;
  std::string set_label;
};

struct DriftReport {
  bool holds = false;
  double max_violation = 0.0;  // max_x (PV)(x) - lambda V(x) - b 1_set(x), clipped at 0
  std::size_t worst_state = 0;
  EVector slack;  // lambda V + b 1_set - PV, per state
  bool sup_on_set_finite = true;
};

DriftReport check_drift(const DiscreteChain& chain, const DriftCertificate& cert,
                        double tol = 1e-12);

/// The two-level certificate V = gamma on C^c, 1 on C, with
/// eta = min_{y in C^c} P(y, C), lambda = 1 + eta (1/gamma - 1), b = gamma.
DriftCertificate two_level_drift_certificate(const DiscreteChain& chain, const Subset& C,
                                             double gamma);

struct SmallSetResult {
  bool ok = false;
  double epsilon = 0.0;
  EVector nu;
};

/// Maximal one-step minorization Q(x, .) >= epsilon nu on D.
SmallSetResult check_small_set(const Matrix& Q, const Subset& D);

// ---------------------------------------------------------------------------
// Convergence in total variation

struct TvDecay {
  std::vector<double> tv;  // tv[n - 1] = || delta_start R^n - pi~ ||_TV
  double rho_hat = 1.0;
  double c_fit = 0.0;      // max over the fit window of tv(n) / rho_hat^n
  double r_squared = 0.0;  // of log tv against n over the fit window; 0 if undefined
  std::size_t fit_first = 0;  // n range [fit_first, fit_last] used
  std::size_t fit_last = 0;
  bool decays() const { return rho_hat < 1.0; }
  /// max over the fit window of tv(n) / (c_fit rho_hat^n).
  double envelope_ratio() const;
};

/// Fit window: n >= 5 and tv > 1e-12. A window whose last value is not below
/// its first reports rho_hat >= 1.
TvDecay tv_decay(const Matrix& R, const EVector& pi_tilde, std::size_t start, std::size_t n_max);

// ---------------------------------------------------------------------------
// Metropolis-Hastings as a teleporting process

/// alpha~(x, y) = min(1, pi(y) K(y, x) / (pi(x) K(x, y))), 0 where K(x, y) = 0.
Matrix mh_acceptance_matrix(const Matrix& K, const EVector& pi);

/// R^MH(x, y) = K(x, y) alpha~(x, y) for y != x; the rest of the row on x.
Matrix build_mh_kernel(const Matrix& K, const EVector& pi);

struct QAlpha {
  EVector alpha_mh;  // sum_y K(x, y) alpha~(x, y)
  Matrix Q;          // K alpha~ / alpha_mh; rows with alpha_mh = 0 are left zero
  std::vector<std::size_t> undefined_rows;
};

QAlpha build_q_alpha(const Matrix& K, const EVector& pi);

struct MhEquivalenceReport {
  double max_discrepancy = 0.0;  // between (1 - alpha_mh) I + diag(alpha_mh) Q and R^MH
  bool q_alpha_defined = true;
};

MhEquivalenceReport mh_gkkt_equivalence(const Matrix& K, const EVector& pi);

// ---------------------------------------------------------------------------
// Random instances

/// Entries U(0.05, 1), rows normalized: irreducible and aperiodic.
DiscreteChain random_positive_chain(std::size_t n, Rng& rng);

/// Symmetric positive K, hence pi-reversible for uniform pi.
Matrix random_symmetric_kernel(std::size_t n, Rng& rng);

/// Non-empty proper subset when n >= 2.
Subset random_subset(std::size_t n, Rng& rng);

/// A pi-reversible chain whose rows on C^c coincide for every y in C (so the
/// memoryless kernel is reversible). With `break_rows`, one cross weight is
/// perturbed symmetrically: the chain stays reversible but the rows differ.
DiscreteChain reversible_chain_with_uniform_exits(std::size_t n, const Subset& C, Rng& rng,
                                                  bool break_rows);

/// Q with pi_C as invariant law: the Metropolis kernel for pi_C with uniform
/// proposals on C.
Matrix pi_c_invariant_kernel(const EVector& pi, const Subset& C, Rng& rng);

// ---------------------------------------------------------------------------
// Chain description files

struct ChainFile {
  DiscreteChain chain;
  std::optional<Subset> C;
};

/// CSV: n rows of n probabilities, optionally a line "C: i,j,k". Throws
/// OracleError naming the offending line or row.
ChainFile read_chain_file(const std::filesystem::path& path);
void write_chain_file(const std::filesystem::path& path, const DiscreteChain& chain,
                      const std::optional<Subset>& C);

}  // namespace kkt
