#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "kkt/runner.hpp"

namespace kkt {
namespace {

constexpr double kIdentityTol = 1e-10;

class Checks {
 public:
  CheckResult& get(const std::string& name, double tolerance) {
    for (auto& c : checks_) {
      if (c.name == name) return c;
    }
    checks_.push_back(CheckResult{name, true, 0.0, tolerance, 0, {}});
    return checks_.back();
  }

  // Residual check: passes while every residual stays within tolerance.
  void residual(const std::string& name, double value, double tolerance, std::uint64_t seed) {
    CheckResult& c = get(name, tolerance);
    if (std::isnan(value) || value > c.worst) {
      c.worst = value;
      c.worst_seed = seed;
    }
    if (!(value <= tolerance)) c.passed = false;
  }

  // Boolean check: `worst` counts failures.
  void boolean(const std::string& name, bool ok, std::uint64_t seed, const std::string& why = {}) {
    CheckResult& c = get(name, 0.0);
    if (!ok) {
      if (c.passed) {
        c.worst_seed = seed;
        c.detail = why;
      }
      c.passed = false;
      c.worst += 1.0;
    }
  }

  std::vector<CheckResult> take() { return std::move(checks_); }

 private:
  std::vector<CheckResult> checks_;
};

double max_abs(const EVector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

EVector random_unit_vector(std::size_t n, Rng& rng) {
  EVector f(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = rng.uniform();
  return f;
}

EVector random_distribution(std::size_t n, Rng& rng) {
  EVector p(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = 0.05 + rng.uniform();
  return p / p.sum();
}

// The pair-chain checks for a given chain, region and pi_C-invariant Q.
void kkt_checks(Checks& checks, const DiscreteChain& chain, const EVector& pi, const Subset& C,
                const Matrix& Q, std::uint64_t seed) {
  const DiscreteKktKernel K = build_kkt_kernel(chain, C, Q);
  const EVector pt = kkt_stationary(chain, pi, C, Q);
  checks.residual("kkt invariance |pi~ R - pi~|", max_abs(K.R.transpose() * pt - pt), kIdentityTol,
                  seed);
  EVector marginal = EVector::Zero(pi.size());
  for (std::size_t y = 0; y < K.n; ++y) {
    for (std::size_t k = 0; k < C.size(); ++k) marginal(y) += pt(K.pair_index(y, k));
  }
  checks.residual("kkt first marginal |pi~(y, .) - pi|", max_abs(marginal - pi), kIdentityTol, seed);
  checks.residual("kkt total mass |pi~ - 1|", std::abs(pt.sum() - 1.0), kIdentityTol, seed);
}

void kac_checks(Checks& checks, const DiscreteChain& chain, const EVector& pi, const Subset& C,
                const EVector& f, std::uint64_t seed) {
  const KacResult kac = kac_measures(chain, pi, C, f);
  const double target = pi.dot(f);
  checks.residual("kac pi0(f) = pi(f)", std::abs(kac.pi0 - target), kIdentityTol, seed);
  checks.residual("kac pi1(f) = pi(f)", std::abs(kac.pi1 - target), kIdentityTol, seed);
}

Subset subset_for_rows(std::size_t n, Rng& rng) {
  // |C| >= 2 and C^c non-empty, so that breaking rows is meaningful.
  Subset C = random_subset(n, rng);
  if (C.size() < 2 || C.size() == n) C = {0, 1};
  return C;
}

}  // namespace

bool VerifyReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

const CheckResult* VerifyReport::find(std::string_view name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

VerifyReport run_oracle_sweep(std::size_t instances, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  Checks checks;
  for (std::size_t i = 0; i < instances; ++i) {
    const std::uint64_t inst = seed + i;
    Rng rng(inst);
    const std::size_t n = 2 + rng.index(7);
    const DiscreteChain chain = random_positive_chain(n, rng);
    const Subset C = random_subset(n, rng);
    const EVector f = random_unit_vector(n, rng);
    EVector alpha = random_unit_vector(n, rng);

    const StationaryResult st = stationary_distribution(chain);
    const EVector& pi = st.pi;
    checks.residual("stationary |pi P - pi|", st.residual, kIdentityTol, inst);
    checks.residual("stationary vs power iteration",
                    max_abs(pi - stationary_by_power_iteration(chain)), kIdentityTol, inst);

    kac_checks(checks, chain, pi, C, f, inst);
    const GeneralizedKacResult gk = generalized_kac(chain, pi, alpha, f);
    checks.residual("generalized kac = pi(f)", std::abs(gk.value - pi.dot(f)), kIdentityTol, inst);

    const DiscreteChain S = build_memoryless_kernel(chain, pi, C);
    checks.residual("memoryless invariance |pi S - pi|", max_abs(S.P.transpose() * pi - pi),
                    kIdentityTol, inst);

    const Matrix Q = pi_c_invariant_kernel(pi, C, rng);
    kkt_checks(checks, chain, pi, C, Q, inst);

    // Uniqueness link: the stationary law is unique iff the only harmonic
    // functions are constant. Checked on the instance and on a reducible
    // block-diagonal chain built from it.
    const std::size_t hd = harmonic_dimension(chain.P);
    checks.boolean("uniqueness link", st.unique == (hd == 1) && hd == 1, inst,
                   "harmonic dimension " + std::to_string(hd));
    {
      Matrix B = Matrix::Zero(2 * n, 2 * n);
      B.topLeftCorner(n, n) = chain.P;
      B.bottomRightCorner(n, n) = chain.P;
      const DiscreteChain split = make_chain(B);
      const StationaryResult sb = stationary_distribution(split);
      const std::size_t hb = harmonic_dimension(B);
      checks.boolean("uniqueness link", !sb.unique && hb == 2, inst,
                     "reducible chain: harmonic dimension " + std::to_string(hb));
    }
    const DiscreteKktKernel R = build_kkt_kernel(chain, C, Q);
    checks.boolean("uniqueness link", harmonic_dimension(R.R) == 1, inst,
                   "pair chain has non-constant harmonic functions");

    // Reversibility biconditional on the random instance and on constructed
    // positive and negative instances.
    const ReversibilityReport rev = check_reversibility_criterion(chain, pi, C, kIdentityTol);
    checks.boolean("reversibility biconditional (random)", rev.consistent(), inst,
                   "criterion " + std::to_string(rev.criterion()) + " vs detailed balance " +
                       std::to_string(rev.s_reversible));
    {
      const std::size_t m = std::max<std::size_t>(n, 3);
      const Subset Cr = subset_for_rows(m, rng);
      const DiscreteChain pos = reversible_chain_with_uniform_exits(m, Cr, rng, false);
      const EVector pi_pos = stationary_distribution(pos).pi;
      const ReversibilityReport rp = check_reversibility_criterion(pos, pi_pos, Cr, kIdentityTol);
      checks.boolean("reversibility positive instance", rp.criterion() && rp.s_reversible, inst);
      const DiscreteChain neg = reversible_chain_with_uniform_exits(m, Cr, rng, true);
      const EVector pi_neg = stationary_distribution(neg).pi;
      const ReversibilityReport rn = check_reversibility_criterion(neg, pi_neg, Cr, kIdentityTol);
      checks.boolean("reversibility negative instance", !rn.criterion() && !rn.s_reversible, inst);
    }

    // Metropolis-Hastings as a GKKT process, with a non-symmetric proposal.
    const Matrix Kp = random_positive_chain(n, rng).P;
    const EVector target = random_distribution(n, rng);
    const MhEquivalenceReport mh = mh_gkkt_equivalence(Kp, target);
    checks.residual("mh as gkkt kernel equality", mh.max_discrepancy, kIdentityTol, inst);
    const Matrix Rmh = build_mh_kernel(Kp, target);
    checks.residual("mh invariance |pi R - pi|", max_abs(Rmh.transpose() * target - target),
                    kIdentityTol, inst);
  }
  VerifyReport report;
  report.checks = checks.take();
  report.instances = instances;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

VerifyReport run_ergodicity_checks() {
  const auto t0 = std::chrono::steady_clock::now();
  Checks checks;
  // A reversible base chain on six states with C = {0, 1} and an MH
  // teleport kernel on C.
  Rng rng(11);
  const Subset C{0, 1};
  const DiscreteChain chain = reversible_chain_with_uniform_exits(6, C, rng, false);
  const EVector pi = stationary_distribution(chain).pi;
  const Matrix Q = pi_c_invariant_kernel(pi, C, rng);

  const DriftCertificate cert = two_level_drift_certificate(chain, C, 2.0);
  const DriftReport drift = check_drift(chain, cert);
  checks.boolean("drift certificate", drift.holds && cert.lambda < 1.0, 11,
                 "lambda " + std::to_string(cert.lambda));
  const SmallSetResult small = check_small_set(Q, [&] {
    Subset all(C.size());
    for (std::size_t k = 0; k < C.size(); ++k) all[k] = k;
    return all;
  }());
  checks.boolean("small set for Q on C", small.ok && small.epsilon > 0.0, 11,
                 "epsilon " + std::to_string(small.epsilon));

  const DiscreteKktKernel K = build_kkt_kernel(chain, C, Q);
  const EVector pt = kkt_stationary(chain, pi, C, Q);
  const TvDecay tv = tv_decay(K.R, pt, K.pair_index(5, 0), 60);
  {
    CheckResult& c = checks.get("tv decay rho_hat < 1", 1.0);
    c.worst = tv.rho_hat;
    c.passed = tv.decays();
    std::ostringstream d;
    d << "fit n in [" << tv.fit_first << ", " << tv.fit_last << "], C_fit " << tv.c_fit
      << ", envelope ratio " << tv.envelope_ratio();
    c.detail = d.str();
    CheckResult& r2 = checks.get("tv decay log-linear R^2 >= 0.99", 0.99);
    r2.worst = tv.r_squared;
    r2.passed = tv.r_squared >= 0.99;
    checks.residual("tv decay envelope ratio - 1", tv.envelope_ratio() - 1.0, 1e-6, 11);
  }

  // Negative control: a cyclic permutation never forgets its start.
  Matrix perm = Matrix::Zero(6, 6);
  for (Eigen::Index i = 0; i < 6; ++i) perm(i, (i + 1) % 6) = 1.0;
  const EVector uniform = EVector::Constant(6, 1.0 / 6.0);
  const TvDecay control = tv_decay(perm, uniform, 0, 60);
  {
    CheckResult& c = checks.get("permutation control rho_hat >= 1", 1.0);
    c.worst = control.rho_hat;
    c.passed = control.rho_hat >= 1.0;
  }

  VerifyReport report;
  report.checks = checks.take();
  report.instances = 1;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

VerifyReport verify_chain_file(const std::filesystem::path& path) {
  const auto t0 = std::chrono::steady_clock::now();
  const ChainFile file = read_chain_file(path);
  const DiscreteChain& chain = file.chain;
  const std::size_t n = chain.n();
  const Subset C = file.C.value_or(Subset{0});
  Checks checks;
  const StationaryResult st = stationary_distribution(chain);
  checks.residual("stationary |pi P - pi|", st.residual, kIdentityTol, 0);
  const std::size_t hd = harmonic_dimension(chain.P);
  checks.boolean("uniqueness link", st.unique == (hd == 1), 0,
                 "harmonic dimension " + std::to_string(hd));

  double pi_c = 0.0;
  for (std::size_t c : C) pi_c += st.pi(static_cast<Eigen::Index>(c));
  if (!(pi_c > 0.0)) {
    CheckResult& c = checks.get("critical region has positive mass", 0.0);
    c.passed = false;
    c.detail = "pi(C) = 0: C is transient";
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      EVector f = EVector::Zero(static_cast<Eigen::Index>(n));
      f(static_cast<Eigen::Index>(j)) = 1.0;
      kac_checks(checks, chain, st.pi, C, f, j);
    }
    const DiscreteChain S = build_memoryless_kernel(chain, st.pi, C);
    checks.residual("memoryless invariance |pi S - pi|", max_abs(S.P.transpose() * st.pi - st.pi),
                    kIdentityTol, 0);
    Rng rng(0);
    kkt_checks(checks, chain, st.pi, C, pi_c_invariant_kernel(st.pi, C, rng), 0);
  }
  VerifyReport report;
  report.checks = checks.take();
  report.instances = 1;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

void print_report(std::ostream& out, const VerifyReport& report) {
  for (const auto& c : report.checks) {
    out << (c.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(44) << c.name
        << " worst " << std::setprecision(3) << std::scientific << c.worst << " tol " << c.tolerance
        << std::defaultfloat;
    if (!c.passed) out << " instance seed " << c.worst_seed;
    if (!c.detail.empty()) out << "  (" << c.detail << ")";
    out << "\n";
  }
  out << report.checks.size() << " checks over " << report.instances << " instances in "
      << std::fixed << std::setprecision(2) << report.seconds << " s" << std::defaultfloat << "\n";
}

}  // namespace kkt
