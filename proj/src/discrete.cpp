#include "kkt/discrete.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "kkt/simd.hpp"

namespace kkt {

void DiscreteChain::validate(double tol) const {
  if (P.rows() == 0 || P.rows() != P.cols()) {
    throw OracleError("transition matrix must be square and non-empty, got " +
                      std::to_string(P.rows()) + "x" + std::to_string(P.cols()));
  }
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < P.cols(); ++j) {
      if (!(P(i, j) >= 0.0) || !std::isfinite(P(i, j))) {
        throw OracleError("row " + std::to_string(i) + ": entry " + std::to_string(j) +
                          " is negative or not finite");
      }
      sum += P(i, j);
    }
    if (std::abs(sum - 1.0) > tol) {
      std::ostringstream os;
      os << "row " << i << ": probabilities sum to " << sum << ", not 1";
      throw OracleError(os.str());
    }
  }
}

DiscreteChain make_chain(Matrix P) {
  DiscreteChain c{std::move(P), {}};
  c.validate();
  return c;
}

std::vector<bool> membership(std::size_t n, const Subset& C) {
  std::vector<bool> in(n, false);
  for (std::size_t c : C) {
    if (c >= n) throw OracleError("subset index " + std::to_string(c) + " out of range");
    in[c] = true;
  }
  return in;
}

Subset complement(std::size_t n, const Subset& C) {
  const auto in = membership(n, C);
  Subset out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!in[i]) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::size_t harmonic_dimension(const Matrix& P) {
  const Matrix A = P - Matrix::Identity(P.rows(), P.cols());
  Eigen::JacobiSVD<Matrix> svd(A);
  const auto& s = svd.singularValues();
  const double tol = 1e-9 * std::max(1.0, s.size() ? s(0) : 0.0);
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) rank += s(i) > tol;
  return static_cast<std::size_t>(P.rows()) - rank;
}

namespace {

double stationarity_residual(const Matrix& P, const EVector& pi) {
  const EVector r = P.transpose() * pi - pi;
  return r.cwiseAbs().maxCoeff();
}

EVector cesaro_average(const Matrix& P, int iterations) {
  const Eigen::Index n = P.rows();
  EVector v = EVector::Constant(n, 1.0 / static_cast<double>(n));
  EVector acc = EVector::Zero(n);
  const Matrix Pt = P.transpose();
  for (int k = 0; k < iterations; ++k) {
    acc += v;
    v = Pt * v;
  }
  return acc / static_cast<double>(iterations);
}

}  // namespace

StationaryResult stationary_distribution(const DiscreteChain& chain) {
  chain.validate();
  const Eigen::Index n = chain.P.rows();
  StationaryResult result;
  if (harmonic_dimension(chain.P) > 1) {
    result.unique = false;
    result.pi = cesaro_average(chain.P, 20000);
    result.residual = stationarity_residual(chain.P, result.pi);
    return result;
  }
  Matrix A = (chain.P - Matrix::Identity(n, n)).transpose();
  A.row(n - 1).setOnes();
  EVector b = EVector::Zero(n);
  b(n - 1) = 1.0;
  result.pi = A.fullPivLu().solve(b);
  result.residual = stationarity_residual(chain.P, result.pi);
  if (!(result.residual <= 1e-8) || std::abs(result.pi.sum() - 1.0) > 1e-8) {
    std::ostringstream os;
    os << "stationary solve failed: residual " << result.residual;
    throw OracleError(os.str());
  }
  return result;
}

EVector stationary_by_power_iteration(const DiscreteChain& chain, int iterations) {
  const Eigen::Index n = chain.P.rows();
  const Matrix Pt = chain.P.transpose();
  EVector v = EVector::Constant(n, 1.0 / static_cast<double>(n));
  for (int k = 0; k < iterations; ++k) {
    EVector next = Pt * v;
    next /= next.sum();
    const double change = (next - v).cwiseAbs().maxCoeff();
    v.swap(next);
    if (change <= 1e-17) break;
  }
  return v;
}

// ---------------------------------------------------------------------------

Matrix taboo_matrix(const Matrix& P, const Subset& C) {
  Matrix P0 = P;
  for (std::size_t c : C) P0.col(static_cast<Eigen::Index>(c)).setZero();
  return P0;
}

double spectral_radius(const Matrix& A) {
  if (A.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(A, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

// (I - M)^{-1} as a dense matrix, or nullopt when rho(M) >= 1.
std::optional<Matrix> resolvent(const Matrix& M) {
  if (spectral_radius(M) >= 1.0 - 1e-12) return std::nullopt;
  const Eigen::Index n = M.rows();
  return Matrix((Matrix::Identity(n, n) - M).partialPivLu().inverse());
}

}  // namespace

KacResult kac_measures(const DiscreteChain& chain, const EVector& pi, const Subset& C,
                       const EVector& f) {
  const Matrix P0 = taboo_matrix(chain.P, C);
  const auto N = resolvent(P0);
  KacResult r;
  if (!N) {
    r.finite = false;
    r.pi0 = r.pi1 = std::numeric_limits<double>::infinity();
    return r;
  }
  const EVector before_return = f + P0 * (*N * f);
  const EVector up_to_return = *N * (chain.P * f);
  for (std::size_t c : C) {
    const auto x = static_cast<Eigen::Index>(c);
    r.pi0 += pi(x) * before_return(x);
    r.pi1 += pi(x) * up_to_return(x);
  }
  return r;
}

GeneralizedKacResult generalized_kac(const DiscreteChain& chain, const EVector& pi,
                                     const EVector& alpha, const EVector& f) {
  const Matrix Pt = chain.P * (EVector::Ones(alpha.size()) - alpha).asDiagonal();
  const auto N = resolvent(Pt);
  GeneralizedKacResult r;
  if (!N) {
    r.finite = false;
    r.value = std::numeric_limits<double>::infinity();
    return r;
  }
  const EVector g = f + Pt * (*N * f);
  r.value = pi.cwiseProduct(alpha).dot(g);
  return r;
}

// ---------------------------------------------------------------------------

DiscreteChain build_memoryless_kernel(const DiscreteChain& chain, const EVector& pi,
                                      const Subset& C) {
  const std::size_t n = chain.n();
  const auto in = membership(n, C);
  double pi_c = 0.0;
  for (std::size_t c : C) pi_c += pi(static_cast<Eigen::Index>(c));
  if (!(pi_c > 0.0)) throw OracleError("pi(C) must be positive");
  Matrix S = Matrix::Zero(n, n);
  for (std::size_t y = 0; y < n; ++y) {
    double to_c = 0.0;
    for (std::size_t c : C) to_c += chain.P(y, c);
    for (std::size_t x = 0; x < n; ++x) {
      S(y, x) = in[x] ? to_c * pi(x) / pi_c : chain.P(y, x);
    }
  }
  return DiscreteChain{std::move(S), chain.labels};
}

double detailed_balance_residual(const Matrix& K, const EVector& pi) {
  double worst = 0.0;
  for (Eigen::Index x = 0; x < K.rows(); ++x) {
    for (Eigen::Index y = x + 1; y < K.cols(); ++y) {
      worst = std::max(worst, std::abs(pi(x) * K(x, y) - pi(y) * K(y, x)));
    }
  }
  return worst;
}

ReversibilityReport check_reversibility_criterion(const DiscreteChain& chain, const EVector& pi,
                                                  const Subset& C, double tol) {
  const std::size_t n = chain.n();
  const Subset out = complement(n, C);
  ReversibilityReport r;
  for (std::size_t a = 0; a < out.size(); ++a) {
    for (std::size_t b = a + 1; b < out.size(); ++b) {
      const auto x = out[a];
      const auto y = out[b];
      r.worst_a = std::max(r.worst_a, std::abs(pi(x) * chain.P(x, y) - pi(y) * chain.P(y, x)));
    }
  }
  std::optional<std::size_t> ref;
  for (std::size_t y : C) {
    if (!(pi(y) > 0.0)) continue;
    if (!ref) {
      ref = y;
      continue;
    }
    for (std::size_t x : out) {
      r.worst_b = std::max(r.worst_b, std::abs(chain.P(y, x) - chain.P(*ref, x)));
    }
  }
  const DiscreteChain S = build_memoryless_kernel(chain, pi, C);
  r.worst_s = detailed_balance_residual(S.P, pi);
  r.cond_a = r.worst_a <= tol;
  r.cond_b = r.worst_b <= tol;
  r.s_reversible = r.worst_s <= tol;
  return r;
}

// ---------------------------------------------------------------------------

DiscreteKktKernel build_kkt_kernel(const DiscreteChain& chain, const Subset& C, const Matrix& Q) {
  const std::size_t n = chain.n();
  const std::size_t m = C.size();
  if (m == 0) throw OracleError("C must be non-empty");
  if (static_cast<std::size_t>(Q.rows()) != m || static_cast<std::size_t>(Q.cols()) != m) {
    throw OracleError("Q must be |C| x |C|");
  }
  const auto in = membership(n, C);
  DiscreteKktKernel K;
  K.C = C;
  K.n = n;
  K.R = Matrix::Zero(n * m, n * m);
  for (std::size_t y = 0; y < n; ++y) {
    double to_c = 0.0;
    for (std::size_t c : C) to_c += chain.P(y, c);
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t row = K.pair_index(y, k);
      for (std::size_t y2 = 0; y2 < n; ++y2) {
        if (!in[y2]) K.R(row, K.pair_index(y2, k)) += chain.P(y, y2);
      }
      for (std::size_t k2 = 0; k2 < m; ++k2) {
        K.R(row, K.pair_index(C[k2], k2)) += to_c * Q(k, k2);
      }
    }
  }
  return K;
}

EVector kkt_stationary(const DiscreteChain& chain, const EVector& pi, const Subset& C,
                       const Matrix& Q) {
  const std::size_t n = chain.n();
  const std::size_t m = C.size();
  if (static_cast<std::size_t>(Q.rows()) != m) throw OracleError("Q must be |C| x |C|");
  // Expected visits before the return to C: (I - P0)^{-1} = I + P0 (I - P0)^{-1}.
  const auto N = resolvent(taboo_matrix(chain.P, C));
  if (!N) throw OracleError("C is not accessible from every state");
  EVector out = EVector::Zero(n * m);
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t k = 0; k < m; ++k) {
      out(y * m + k) = pi(C[k]) * (*N)(C[k], y);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

DriftReport check_drift(const DiscreteChain& chain, const DriftCertificate& cert, double tol) {
  const std::size_t n = chain.n();
  if (static_cast<std::size_t>(cert.V.size()) != n) throw OracleError("V has the wrong length");
  if ((cert.V.array() < 1.0).any()) throw OracleError("drift function must satisfy V >= 1");
  const auto in = membership(n, cert.set);
  const EVector PV = chain.P * cert.V;
  DriftReport r;
  r.slack.resize(static_cast<Eigen::Index>(n));
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t x = 0; x < n; ++x) {
    const double rhs = cert.lambda * cert.V(x) + (in[x] ? cert.b : 0.0);
    r.slack(x) = rhs - PV(x);
    if (-r.slack(x) > worst) {
      worst = -r.slack(x);
      r.worst_state = x;
    }
  }
  r.max_violation = std::max(0.0, worst);
  r.holds = worst <= tol;
  return r;
}

DriftCertificate two_level_drift_certificate(const DiscreteChain& chain, const Subset& C,
                                             double gamma) {
  if (!(gamma >= 1.0)) throw OracleError("gamma must be >= 1");
  const std::size_t n = chain.n();
  const auto in = membership(n, C);
  double eta = 1.0;
  for (std::size_t y = 0; y < n; ++y) {
    if (in[y]) continue;
    double to_c = 0.0;
    for (std::size_t c : C) to_c += chain.P(y, c);
    eta = std::min(eta, to_c);
  }
  DriftCertificate cert;
  cert.V = EVector::Constant(static_cast<Eigen::Index>(n), gamma);
  for (std::size_t c : C) cert.V(c) = 1.0;
  cert.lambda = 1.0 + eta * (1.0 / gamma - 1.0);
  cert.b = gamma;
  cert.set = C;
  cert.set_label = "C";
  return cert;
}

SmallSetResult check_small_set(const Matrix& Q, const Subset& D) {
  if (D.empty()) throw OracleError("small-set candidate D must be non-empty");
  SmallSetResult r;
  EVector m = Q.row(static_cast<Eigen::Index>(D.front())).transpose();
  for (std::size_t x : D) m = m.cwiseMin(Q.row(static_cast<Eigen::Index>(x)).transpose());
  r.epsilon = m.sum();
  if (r.epsilon > 0.0) {
    r.ok = true;
    r.nu = m / r.epsilon;
  }
  return r;
}

// ---------------------------------------------------------------------------

double TvDecay::envelope_ratio() const {
  double worst = 0.0;
  for (std::size_t n = fit_first; n && n <= fit_last; ++n) {
    worst = std::max(worst, tv[n - 1] / (c_fit * std::pow(rho_hat, static_cast<double>(n))));
  }
  return worst;
}

TvDecay tv_decay(const Matrix& R, const EVector& pi_tilde, std::size_t start, std::size_t n_max) {
  const std::size_t m = static_cast<std::size_t>(R.rows());
  if (start >= m) throw OracleError("start index out of range");
  // Row r of R is column r of Rt, contiguous in column-major storage.
  const Matrix Rt = R.transpose();
  std::vector<double> v(m, 0.0);
  std::vector<double> next(m);
  v[start] = 1.0;
  TvDecay out;
  out.tv.reserve(n_max);
  for (std::size_t n = 1; n <= n_max; ++n) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      if (v[i] != 0.0) simd::axpy(v[i], std::span<const double>(Rt.col(i).data(), m), next);
    }
    v.swap(next);
    out.tv.push_back(0.5 * simd::l1_distance(v, std::span<const double>(pi_tilde.data(), m)));
  }

  constexpr double kFloor = 1e-12;
  constexpr std::size_t kFirst = 5;
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t n = kFirst; n <= n_max; ++n) {
    if (out.tv[n - 1] <= kFloor) break;
    xs.push_back(static_cast<double>(n));
    ys.push_back(std::log(out.tv[n - 1]));
  }
  if (xs.empty()) {
    // Already at the floor before the window opens.
    out.rho_hat = 0.0;
    return out;
  }
  out.fit_first = static_cast<std::size_t>(xs.front());
  out.fit_last = static_cast<std::size_t>(xs.back());
  if (xs.size() == 1) {
    out.rho_hat = 1.0;
    out.c_fit = out.tv[out.fit_first - 1];
    return out;
  }
  const double k = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / k;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / k;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - (intercept + slope * xs[i]);
    ss_res += e * e;
  }
  out.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 0.0;
  out.rho_hat = std::exp(slope);
  if (ys.back() >= ys.front()) out.rho_hat = std::max(1.0, out.rho_hat);
  for (std::size_t n = out.fit_first; n <= out.fit_last; ++n) {
    out.c_fit = std::max(out.c_fit, out.tv[n - 1] / std::pow(out.rho_hat, static_cast<double>(n)));
  }
  return out;
}

// ---------------------------------------------------------------------------

Matrix mh_acceptance_matrix(const Matrix& K, const EVector& pi) {
  const Eigen::Index n = K.rows();
  Matrix A = Matrix::Zero(n, n);
  for (Eigen::Index x = 0; x < n; ++x) {
    for (Eigen::Index y = 0; y < n; ++y) {
      if (K(x, y) <= 0.0) continue;
      if (K(y, x) <= 0.0) throw OracleError("proposal support is not symmetric");
      A(x, y) = std::min(1.0, pi(y) * K(y, x) / (pi(x) * K(x, y)));
    }
  }
  return A;
}

Matrix build_mh_kernel(const Matrix& K, const EVector& pi) {
  const Matrix A = mh_acceptance_matrix(K, pi);
  const Eigen::Index n = K.rows();
  Matrix R = Matrix::Zero(n, n);
  for (Eigen::Index x = 0; x < n; ++x) {
    double stay = K(x, x);
    for (Eigen::Index y = 0; y < n; ++y) {
      if (y == x) continue;
      R(x, y) = K(x, y) * A(x, y);
      stay += K(x, y) * (1.0 - A(x, y));
    }
    R(x, x) = stay;
  }
  return R;
}

QAlpha build_q_alpha(const Matrix& K, const EVector& pi) {
  const Matrix A = mh_acceptance_matrix(K, pi);
  const Matrix KA = K.cwiseProduct(A);
  QAlpha q;
  q.alpha_mh = KA.rowwise().sum();
  q.Q = Matrix::Zero(K.rows(), K.cols());
  for (Eigen::Index x = 0; x < K.rows(); ++x) {
    if (q.alpha_mh(x) > 0.0) {
      q.Q.row(x) = KA.row(x) / q.alpha_mh(x);
    } else {
      q.undefined_rows.push_back(static_cast<std::size_t>(x));
    }
  }
  return q;
}

MhEquivalenceReport mh_gkkt_equivalence(const Matrix& K, const EVector& pi) {
  const Matrix R = build_mh_kernel(K, pi);
  const QAlpha q = build_q_alpha(K, pi);
  const Eigen::Index n = K.rows();
  // Y-marginal law of the teleporting process with P = I:
  // stay with probability 1 - alpha_mh(y), otherwise move by Q_alpha.
  Matrix G = q.alpha_mh.asDiagonal() * q.Q;
  for (Eigen::Index y = 0; y < n; ++y) G(y, y) += 1.0 - q.alpha_mh(y);
  MhEquivalenceReport r;
  r.max_discrepancy = (G - R).cwiseAbs().maxCoeff();
  r.q_alpha_defined = q.undefined_rows.empty();
  return r;
}

// ---------------------------------------------------------------------------

DiscreteChain random_positive_chain(std::size_t n, Rng& rng) {
  Matrix P(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) P(i, j) = 0.05 + 0.95 * rng.uniform();
    P.row(i) /= P.row(i).sum();
  }
  return DiscreteChain{std::move(P), {}};
}

Matrix random_symmetric_kernel(std::size_t n, Rng& rng) {
  // Symmetric weights with a common row sum via a lazy diagonal.
  Matrix W(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) W(i, j) = W(j, i) = 0.05 + 0.95 * rng.uniform();
  }
  const double cap = W.rowwise().sum().maxCoeff();
  for (std::size_t i = 0; i < n; ++i) W(i, i) += cap - W.row(i).sum();
  return W / cap;
}

Subset random_subset(std::size_t n, Rng& rng) {
  if (n < 2) return Subset{0};
  const std::size_t size = 1 + rng.index(n - 1);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng.index(i + 1)]);
  Subset C(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(size));
  std::sort(C.begin(), C.end());
  return C;
}

DiscreteChain reversible_chain_with_uniform_exits(std::size_t n, const Subset& C, Rng& rng,
                                                  bool break_rows) {
  const Subset out = complement(n, C);
  if (C.empty() || out.empty()) throw OracleError("need C and its complement non-empty");
  if (break_rows && C.size() < 2) throw OracleError("breaking rows needs |C| >= 2");
  auto draw = [&rng] { return 0.5 + rng.uniform(); };
  std::vector<double> a(n, 0.0);
  std::vector<double> m(n, 0.0);
  for (std::size_t y : C) a[y] = draw();
  for (std::size_t x : out) m[x] = draw();
  const double k = draw();
  // W = pi (x) P, symmetric. Rank-one blocks on C x C^c and C x C make every
  // row of P leaving C proportional to m on C^c.
  Matrix W = Matrix::Zero(n, n);
  for (std::size_t y : C) {
    for (std::size_t x : out) W(y, x) = W(x, y) = a[y] * m[x];
    for (std::size_t y2 : C) W(y, y2) = k * a[y] * a[y2];
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t j = i; j < out.size(); ++j) {
      W(out[i], out[j]) = W(out[j], out[i]) = 0.05 + 0.95 * rng.uniform();
    }
  }
  if (break_rows) {
    W(C[0], out[0]) *= 1.5;
    W(out[0], C[0]) = W(C[0], out[0]);
  }
  Matrix P = W;
  for (std::size_t i = 0; i < n; ++i) P.row(i) /= W.row(i).sum();
  return DiscreteChain{std::move(P), {}};
}

Matrix pi_c_invariant_kernel(const EVector& pi, const Subset& C, Rng& rng) {
  const std::size_t m = C.size();
  const Matrix K = random_symmetric_kernel(m, rng);
  EVector pic(m);
  for (std::size_t k = 0; k < m; ++k) pic(k) = pi(C[k]);
  return build_mh_kernel(K, pic / pic.sum());
}

// ---------------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
}

std::vector<std::string_view> split(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto c = s.find(',', start);
    out.push_back(trim(s.substr(start, c == s.npos ? s.npos : c - start)));
    if (c == s.npos) return out;
    start = c + 1;
  }
}

}  // namespace

ChainFile read_chain_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw OracleError("cannot open chain file " + path.string());
  std::vector<std::vector<double>> rows;
  std::optional<Subset> C;
  std::string raw;
  std::size_t line = 0;
  auto fail = [&](const std::string& msg) {
    return OracleError(path.string() + ":" + std::to_string(line) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++line;
    const auto text = trim(raw);
    if (text.empty() || text.front() == '#') continue;
    if (text.starts_with("C:")) {
      Subset s;
      for (auto field : split(text.substr(2))) {
        std::size_t v = 0;
        const auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
        if (ec != std::errc() || p != field.data() + field.size()) {
          throw fail("bad subset index '" + std::string(field) + "'");
        }
        s.push_back(v);
      }
      std::sort(s.begin(), s.end());
      s.erase(std::unique(s.begin(), s.end()), s.end());
      C = std::move(s);
      continue;
    }
    std::vector<double> row;
    for (auto field : split(text)) {
      double v = 0.0;
      const auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || p != field.data() + field.size() || field.empty()) {
        throw fail("not a number: '" + std::string(field) + "'");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw OracleError(path.string() + ": no matrix rows");
  const std::size_t n = rows.size();
  Matrix P(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) {
      throw OracleError(path.string() + ": row " + std::to_string(i) + " has " +
                        std::to_string(rows[i].size()) + " entries, expected " +
                        std::to_string(n));
    }
    for (std::size_t j = 0; j < n; ++j) P(i, j) = rows[i][j];
  }
  ChainFile file{DiscreteChain{std::move(P), {}}, std::move(C)};
  try {
    file.chain.validate(1e-9);
  } catch (const OracleError& e) {
    throw OracleError(path.string() + ": " + e.what());
  }
  if (file.C) {
    for (std::size_t c : *file.C) {
      if (c >= n) throw OracleError(path.string() + ": subset index " + std::to_string(c) +
                                    " out of range");
    }
    if (file.C->empty()) throw OracleError(path.string() + ": empty subset C");
  }
  return file;
}

void write_chain_file(const std::filesystem::path& path, const DiscreteChain& chain,
                      const std::optional<Subset>& C) {
  std::ofstream out(path);
  if (!out) throw OracleError("cannot write " + path.string());
  for (Eigen::Index i = 0; i < chain.P.rows(); ++i) {
    for (Eigen::Index j = 0; j < chain.P.cols(); ++j) {
      char buf[32];
      const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, chain.P(i, j));
      if (j) out << ',';
      out.write(buf, p - buf);
    }
    out << '\n';
  }
  if (C) {
    out << "C: ";
    for (std::size_t k = 0; k < C->size(); ++k) out << (k ? "," : "") << (*C)[k];
    out << '\n';
  }
}

}  // namespace kkt
