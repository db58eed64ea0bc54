#include "kkt/kernels.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "kkt/numeric.hpp"
#include "kkt/simd.hpp"

namespace kkt {

std::string_view kernel_kind_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::RWM:
      return "rwm";
    case KernelKind::MALA:
      return "mala";
    case KernelKind::HMC:
      return "hmc";
  }
  return "unknown";
}

KernelConfig KernelConfig::rwm(double sigma) {
  KernelConfig c;
  c.kind = KernelKind::RWM;
  c.sigma = sigma;
  return c;
}

KernelConfig KernelConfig::mala(double gamma) {
  KernelConfig c;
  c.kind = KernelKind::MALA;
  c.gamma = gamma;
  return c;
}

KernelConfig KernelConfig::hmc(double delta_t, int n_hmc) {
  KernelConfig c;
  c.kind = KernelKind::HMC;
  c.delta_t = delta_t;
  c.n_hmc = n_hmc;
  return c;
}

void KernelConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string(name) + " must be a positive finite number");
    }
  };
  switch (kind) {
    case KernelKind::RWM:
      positive(sigma, "sigma");
      break;
    case KernelKind::MALA:
      positive(gamma, "gamma");
      break;
    case KernelKind::HMC:
      positive(delta_t, "delta_t");
      if (n_hmc < 1) throw std::invalid_argument("n_hmc must be a positive integer");
      break;
  }
}

std::string KernelConfig::describe() const {
  std::ostringstream os;
  os << kernel_kind_name(kind);
  switch (kind) {
    case KernelKind::RWM:
      os << "(sigma=" << sigma << ")";
      break;
    case KernelKind::MALA:
      os << "(gamma=" << gamma << ")";
      break;
    case KernelKind::HMC:
      os << "(delta_t=" << delta_t << ", n_hmc=" << n_hmc << ")";
      break;
  }
  return os.str();
}

double mh_log_acceptance(double log_pi_x, double log_pi_y, double log_q_fwd, double log_q_bwd) {
  if (log_pi_y == kNegInf) return kNegInf;
  const double r = log_pi_y + log_q_bwd - log_pi_x - log_q_fwd;
  if (std::isnan(r)) return kNegInf;
  return std::min(0.0, r);
}

double mh_log_acceptance(const TargetDensity& target, double log_q_fwd, double log_q_bwd,
                         std::span<const double> x, std::span<const double> y) {
  const double log_pi_y = target.log_density(y);
  if (log_pi_y == kNegInf) return kNegInf;
  return mh_log_acceptance(target.log_density(x), log_pi_y, log_q_fwd, log_q_bwd);
}

namespace {

StepOutcome decide(std::span<const double> x, Vector candidate, double log_alpha, double u) {
  StepOutcome out;
  out.log_alpha = log_alpha;
  out.accepted = std::log(u) < log_alpha;
  if (out.accepted) {
    out.state = std::move(candidate);
  } else {
    out.state.assign(x.begin(), x.end());
  }
  return out;
}

}  // namespace

StepOutcome rwm_step(const TargetDensity& target, const KernelConfig& cfg,
                     std::span<const double> x, Rng& rng) {
  Vector xi(x.size());
  rng.normal(xi);
  Vector y(x.size());
  simd::add_scaled(x, cfg.sigma, xi, y);
  const double u = rng.uniform();
  const double log_alpha = mh_log_acceptance(target, 0.0, 0.0, x, y);
  return decide(x, std::move(y), log_alpha, u);
}

double mala_log_proposal_density(std::span<const double> x, std::span<const double> grad_x,
                                 std::span<const double> y, double gamma) {
  const double d = static_cast<double>(x.size());
  Vector mean(x.size());
  simd::add_scaled(x, gamma, grad_x, mean);
  return -0.5 * d * std::log(4.0 * gamma * std::numbers::pi) -
         simd::squared_distance(y, mean) / (4.0 * gamma);
}

StepOutcome mala_step(const TargetDensity& target, const KernelConfig& cfg,
                      std::span<const double> x, Rng& rng) {
  const std::size_t d = x.size();
  const Vector grad_x = target.grad_log_density(x);
  Vector xi(d);
  rng.normal(xi);
  Vector y(d);
  simd::add_scaled(x, cfg.gamma, grad_x, y);
  simd::axpy(std::sqrt(2.0 * cfg.gamma), xi, y);
  const double u = rng.uniform();

  const double log_pi_y = target.log_density(y);
  double log_alpha = kNegInf;
  if (log_pi_y != kNegInf) {
    const Vector grad_y = target.grad_log_density(y);
    const double log_q_fwd = mala_log_proposal_density(x, grad_x, y, cfg.gamma);
    const double log_q_bwd = mala_log_proposal_density(y, grad_y, x, cfg.gamma);
    log_alpha = mh_log_acceptance(target.log_density(x), log_pi_y, log_q_fwd, log_q_bwd);
  }
  return decide(x, std::move(y), log_alpha, u);
}

namespace {

// n leapfrog steps in place; grad holds grad log pi(x) on entry and exit.
void leapfrog(const TargetDensity& target, double dt, int n, Vector& x, Vector& v, Vector& grad) {
  const double half = 0.5 * dt;
  for (int i = 0; i < n; ++i) {
    simd::axpy(half, grad, v);
    simd::axpy(dt, v, x);
    target.grad_log_density(x, grad);
    simd::axpy(half, grad, v);
  }
}

}  // namespace

std::pair<Vector, Vector> verlet_step(const TargetDensity& target, double delta_t,
                                      std::span<const double> x, std::span<const double> v) {
  Vector xn(x.begin(), x.end());
  Vector vn(v.begin(), v.end());
  Vector grad = target.grad_log_density(xn);
  leapfrog(target, delta_t, 1, xn, vn, grad);
  return {std::move(xn), std::move(vn)};
}

StepOutcome hmc_step(const TargetDensity& target, const KernelConfig& cfg,
                     std::span<const double> x, Rng& rng) {
  const std::size_t d = x.size();
  Vector v(d);
  rng.normal(v);
  const double u = rng.uniform();

  const double h0 = -target.log_density(x) + 0.5 * simd::squared_norm(v);
  Vector xn(x.begin(), x.end());
  Vector grad = target.grad_log_density(xn);
  leapfrog(target, cfg.delta_t, cfg.n_hmc, xn, v, grad);
  const double h1 = -target.log_density(xn) + 0.5 * simd::squared_norm(v);

  double log_alpha = kNegInf;
  if (std::isfinite(h0) && std::isfinite(h1)) log_alpha = std::min(0.0, h0 - h1);
  return decide(x, std::move(xn), log_alpha, u);
}

StepOutcome base_step(const TargetDensity& target, const KernelConfig& cfg,
                      std::span<const double> x, Rng& rng) {
  switch (cfg.kind) {
    case KernelKind::RWM:
      return rwm_step(target, cfg, x, rng);
    case KernelKind::MALA:
      return mala_step(target, cfg, x, rng);
    case KernelKind::HMC:
      return hmc_step(target, cfg, x, rng);
  }
  throw std::logic_error("unknown kernel kind");
}

}  // namespace kkt
