#include <doctest.h>

#include <cmath>

#include "kkt/discrete.hpp"
#include "support/helpers.hpp"

using namespace kkt;

namespace {

Matrix swap2() {
  Matrix P(2, 2);
  P << 0.0, 1.0, 1.0, 0.0;
  return P;
}

EVector random_f(Rng& rng, std::size_t n) {
  EVector f(n);
  for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = rng.normal();
  return f;
}

double inf_norm(const EVector& v) { return v.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("stationary distribution") {
  const StationaryResult sw = stationary_distribution(make_chain(swap2()));
  CHECK(sw.unique);
  CHECK(sw.pi[0] == doctest::Approx(0.5));
  CHECK(sw.pi[1] == doctest::Approx(0.5));

  CHECK_FALSE(stationary_distribution(make_chain(Matrix::Identity(3, 3))).unique);

  Rng rng(1);
  const DiscreteChain c = random_positive_chain(6, rng);
  const StationaryResult r = stationary_distribution(c);
  CHECK(r.unique);
  CHECK(inf_norm((r.pi.transpose() * c.P).transpose() - r.pi) <= 1e-12);
  CHECK(inf_norm(stationary_by_power_iteration(c) - r.pi) <= 1e-10);
}

TEST_CASE("chain validation names the bad row") {
  Matrix P(2, 2);
  P << 0.5, 0.5, 0.6, 0.3;
  try {
    make_chain(P).validate();
    FAIL("expected OracleError");
  } catch (const OracleError& e) {
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
  P << 0.5, 0.5, -0.1, 1.1;
  CHECK_THROWS_AS(make_chain(P).validate(), OracleError);
}

TEST_CASE("Kac measures") {
  SUBCASE("C = everything gives pi(f)") {
    Rng rng(2);
    const DiscreteChain c = random_positive_chain(5, rng);
    const EVector pi = stationary_distribution(c).pi;
    const EVector f = random_f(rng, 5);
    const KacResult k = kac_measures(c, pi, {0, 1, 2, 3, 4}, f);
    CHECK(k.pi0 == doctest::Approx(pi.dot(f)).epsilon(1e-12));
  }
  SUBCASE("swap chain by path enumeration") {
    const DiscreteChain c = make_chain(swap2());
    EVector pi(2);
    pi << 0.5, 0.5;
    EVector f(2);
    f << 3.0, -7.0;
    const KacResult k = kac_measures(c, pi, {0}, f);
    // From 0: path 0 -> 1 -> 0, so the k = 0..sigma-1 sum is f0 + f1.
    CHECK(k.pi0 == doctest::Approx(0.5 * (3.0 - 7.0)).epsilon(1e-15));
    CHECK(k.pi1 == doctest::Approx(0.5 * (-7.0 + 3.0)).epsilon(1e-15));
  }
  SUBCASE("random instances") {
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
      const DiscreteChain c = random_positive_chain(6, rng);
      const EVector pi = stationary_distribution(c).pi;
      const Subset C = random_subset(6, rng);
      const EVector f = random_f(rng, 6);
      const KacResult k = kac_measures(c, pi, C, f);
      CHECK(k.finite);
      CHECK(std::abs(k.pi0 - pi.dot(f)) <= 1e-10);
      CHECK(std::abs(k.pi1 - pi.dot(f)) <= 1e-10);
    }
  }
  SUBCASE("inaccessible set is flagged") {
    Matrix P(3, 3);
    P << 1.0, 0.0, 0.0, 0.0, 0.5, 0.5, 0.0, 0.5, 0.5;
    EVector pi(3);
    pi << 1.0, 0.0, 0.0;
    CHECK_FALSE(kac_measures(make_chain(P), pi, {0}, EVector::Ones(3)).finite);
  }
}

TEST_CASE("generalized Kac") {
  Rng rng(4);
  const DiscreteChain c = random_positive_chain(6, rng);
  const EVector pi = stationary_distribution(c).pi;
  const EVector f = random_f(rng, 6);
  CHECK(generalized_kac(c, pi, EVector::Ones(6), f).value == doctest::Approx(pi.dot(f)).epsilon(1e-12));

  const Subset C{1, 4};
  EVector ind = EVector::Zero(6);
  ind[1] = ind[4] = 1.0;
  CHECK(generalized_kac(c, pi, ind, f).value == doctest::Approx(kac_measures(c, pi, C, f).pi0).epsilon(1e-12));

  for (int i = 0; i < 50; ++i) {
    EVector alpha(6);
    for (Eigen::Index j = 0; j < 6; ++j) alpha[j] = 0.01 + 0.99 * rng.uniform();
    const GeneralizedKacResult g = generalized_kac(c, pi, alpha, f);
    CHECK(g.finite);
    CHECK(std::abs(g.value - pi.dot(f)) <= 1e-10);
  }
}

TEST_CASE("memoryless kernel") {
  Rng rng(5);
  const DiscreteChain c = random_positive_chain(5, rng);
  const EVector pi = stationary_distribution(c).pi;

  const DiscreteChain all = build_memoryless_kernel(c, pi, {0, 1, 2, 3, 4});
  for (int i = 0; i < 5; ++i) CHECK(inf_norm(all.P.row(i).transpose() - pi) <= 1e-14);

  // No transitions into C: S = P.
  Matrix P(3, 3);
  P << 0.5, 0.5, 0.0, 0.3, 0.7, 0.0, 0.2, 0.2, 0.6;
  EVector w(3);
  w << 0.3, 0.3, 0.4;
  CHECK((build_memoryless_kernel(make_chain(P), w, {2}).P - P).cwiseAbs().maxCoeff() <= 1e-15);

  for (int i = 0; i < 20; ++i) {
    const Subset C = random_subset(5, rng);
    const DiscreteChain S = build_memoryless_kernel(c, pi, C);
    CHECK_NOTHROW(S.validate());
    CHECK(inf_norm((pi.transpose() * S.P).transpose() - pi) <= 1e-12);
  }
}

TEST_CASE("reversibility criterion") {
  Rng rng(6);
  const Subset C{0, 1};
  const DiscreteChain good = reversible_chain_with_uniform_exits(4, C, rng, false);
  const EVector pg = stationary_distribution(good).pi;
  const ReversibilityReport rg = check_reversibility_criterion(good, pg, C);
  CHECK(rg.cond_a);
  CHECK(rg.cond_b);
  CHECK(rg.s_reversible);

  const DiscreteChain bad = reversible_chain_with_uniform_exits(4, C, rng, true);
  const EVector pb = stationary_distribution(bad).pi;
  const ReversibilityReport rb = check_reversibility_criterion(bad, pb, C);
  CHECK(rb.cond_a);
  CHECK_FALSE(rb.cond_b);
  CHECK_FALSE(rb.s_reversible);

  for (int i = 0; i < 100; ++i) {
    const DiscreteChain c = random_positive_chain(5, rng);
    const EVector pi = stationary_distribution(c).pi;
    CHECK(check_reversibility_criterion(c, pi, random_subset(5, rng)).consistent());
  }
}

TEST_CASE("KKT kernel and extended target") {
  Rng rng(7);
  const DiscreteChain c = random_positive_chain(5, rng);
  const EVector pi = stationary_distribution(c).pi;

  SUBCASE("single anchor reduces to the memoryless kernel") {
    const DiscreteKktKernel R = build_kkt_kernel(c, {2}, Matrix::Identity(1, 1));
    const DiscreteChain S = build_memoryless_kernel(c, pi, {2});
    CHECK((R.R - S.P).cwiseAbs().maxCoeff() <= 1e-15);
  }
  SUBCASE("invariance, marginal and structure") {
    for (int i = 0; i < 20; ++i) {
      const Subset C = random_subset(5, rng);
      const Matrix Q = pi_c_invariant_kernel(pi, C, rng);
      const DiscreteKktKernel R = build_kkt_kernel(c, C, Q);
      CHECK((R.R.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
      const EVector pt = kkt_stationary(c, pi, C, Q);
      CHECK(inf_norm((pt.transpose() * R.R).transpose() - pt) <= 1e-10);
      EVector marginal = EVector::Zero(5);
      for (std::size_t j = 0; j < R.size(); ++j) marginal[R.pair_of(j).first] += pt[j];
      CHECK(inf_norm(marginal - pi) <= 1e-10);

      const StationaryResult direct = stationary_distribution(make_chain(R.R));
      CHECK(direct.unique);
      CHECK(inf_norm(direct.pi - pt) <= 1e-10);

      const auto in_c = membership(5, C);
      for (std::size_t a = 0; a < R.size(); ++a) {
        for (std::size_t b = 0; b < R.size(); ++b) {
          const auto [y1, z1] = R.pair_of(b);
          if (!in_c[y1] && z1 != R.pair_of(a).second) CHECK(R.R(a, b) == 0.0);
        }
      }
    }
  }
  SUBCASE("C = everything puts all mass on the diagonal") {
    const Subset C{0, 1, 2, 3, 4};
    const Matrix Q = pi_c_invariant_kernel(pi, C, rng);
    const EVector pt = kkt_stationary(c, pi, C, Q);
    const DiscreteKktKernel R = build_kkt_kernel(c, C, Q);
    for (std::size_t j = 0; j < R.size(); ++j) {
      const auto [y, z] = R.pair_of(j);
      CHECK(pt[j] == doctest::Approx(y == z ? pi[y] : 0.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("harmonic dimension") {
  CHECK(harmonic_dimension(swap2()) == 1);
  Matrix block = Matrix::Zero(4, 4);
  block.topLeftCorner(2, 2) = swap2();
  block.bottomRightCorner(2, 2) << 0.3, 0.7, 0.6, 0.4;
  CHECK(harmonic_dimension(block) == 2);
  Rng rng(8);
  const DiscreteChain c = random_positive_chain(6, rng);
  CHECK(harmonic_dimension(c.P) == 1);
  // Cross-check: powers of P flatten any h to a constant.
  EVector h = random_f(rng, 6);
  for (int i = 0; i < 200; ++i) h = c.P * h;
  CHECK(h.maxCoeff() - h.minCoeff() <= 1e-10);
}

TEST_CASE("drift certificates") {
  Matrix P(3, 3);
  P << 0.2, 0.4, 0.4, 0.5, 0.25, 0.25, 0.6, 0.2, 0.2;
  const DiscreteChain c = make_chain(P);
  const DriftCertificate cert = two_level_drift_certificate(c, {0}, 2.0);
  CHECK(cert.lambda == doctest::Approx(0.75));
  CHECK(cert.b == doctest::Approx(2.0));
  const DriftReport ok = check_drift(c, cert);
  CHECK(ok.holds);
  CHECK(ok.slack.minCoeff() >= -1e-12);

  DriftCertificate trivial{EVector::Ones(3), 0.5, 1.0, {0, 1, 2}, "E"};
  CHECK(check_drift(c, trivial).holds);

  Matrix stuck(3, 3);
  stuck << 0.2, 0.4, 0.4, 0.0, 0.5, 0.5, 0.6, 0.2, 0.2;
  const DiscreteChain s = make_chain(stuck);
  DriftCertificate tight = two_level_drift_certificate(s, {0}, 2.0);
  tight.lambda = 0.9;
  const DriftReport bad = check_drift(s, tight);
  CHECK_FALSE(bad.holds);
  CHECK(bad.worst_state == 1);
}

TEST_CASE("small sets") {
  Matrix same(3, 3);
  same << 0.2, 0.3, 0.5, 0.2, 0.3, 0.5, 0.2, 0.3, 0.5;
  const SmallSetResult all = check_small_set(same, {0, 1, 2});
  CHECK(all.ok);
  CHECK(all.epsilon == doctest::Approx(1.0));
  CHECK(all.nu[2] == doctest::Approx(0.5));

  Matrix zero_col(2, 2);
  zero_col << 1.0, 0.0, 0.5, 0.5;
  const SmallSetResult z = check_small_set(zero_col, {0, 1});
  CHECK(z.ok);
  CHECK(z.nu[1] == 0.0);
  CHECK(z.epsilon == doctest::Approx(0.5));

  Rng rng(9);
  const DiscreteChain q = random_positive_chain(5, rng);
  const SmallSetResult r = check_small_set(q.P, {0, 1, 2, 3, 4});
  REQUIRE(r.ok);
  CHECK(r.epsilon > 0.0);
  for (int x = 0; x < 5; ++x) {
    for (int y = 0; y < 5; ++y) CHECK(q.P(x, y) >= r.epsilon * r.nu[y] - 1e-14);
  }
}

TEST_CASE("TV decay") {
  EVector pt(3);
  pt << 0.2, 0.3, 0.5;
  Matrix coupled(3, 3);
  for (int i = 0; i < 3; ++i) coupled.row(i) = pt.transpose();
  const TvDecay d = tv_decay(coupled, pt, 0, 10);
  for (double v : d.tv) CHECK(v <= 1e-15);

  Rng rng(10);
  const Subset C{0, 1};
  const DiscreteChain c = reversible_chain_with_uniform_exits(6, C, rng, false);
  const EVector pi = stationary_distribution(c).pi;
  const Matrix Q = pi_c_invariant_kernel(pi, C, rng);
  CHECK(check_drift(c, two_level_drift_certificate(c, C, 2.0)).holds);
  CHECK(check_small_set(Q, C).ok);
  const DiscreteKktKernel R = build_kkt_kernel(c, C, Q);
  const TvDecay fit = tv_decay(R.R, kkt_stationary(c, pi, C, Q), R.pair_index(5, 0), 60);
  CHECK(fit.decays());
  CHECK(fit.r_squared >= 0.99);
  CHECK(fit.envelope_ratio() <= 1.0 + 1e-6);

  Matrix perm = Matrix::Zero(3, 3);
  perm(0, 1) = perm(1, 2) = perm(2, 0) = 1.0;
  EVector uniform = EVector::Constant(3, 1.0 / 3.0);
  CHECK(tv_decay(perm, uniform, 0, 40).rho_hat >= 1.0);
}

TEST_CASE("Metropolis-Hastings kernels") {
  SUBCASE("uniform target and symmetric K") {
    Rng rng(11);
    const Matrix K = random_symmetric_kernel(4, rng);
    const EVector pi = EVector::Constant(4, 0.25);
    CHECK((mh_acceptance_matrix(K, pi).array() == 1.0).all());
    CHECK((build_mh_kernel(K, pi) - K).cwiseAbs().maxCoeff() <= 1e-15);
    const QAlpha qa = build_q_alpha(K, pi);
    CHECK((qa.Q - K).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(mh_gkkt_equivalence(K, pi).max_discrepancy <= 1e-15);
  }
  SUBCASE("two-state example") {
    Matrix K(2, 2);
    K << 0.5, 0.5, 0.5, 0.5;
    EVector pi(2);
    pi << 2.0 / 3.0, 1.0 / 3.0;
    const Matrix A = mh_acceptance_matrix(K, pi);
    CHECK(A(0, 1) == doctest::Approx(0.5));
    CHECK(A(1, 0) == doctest::Approx(1.0));
    const Matrix R = build_mh_kernel(K, pi);
    CHECK(R(0, 1) == doctest::Approx(0.25));
    CHECK(R(0, 0) == doctest::Approx(0.75));
    CHECK(mh_gkkt_equivalence(K, pi).max_discrepancy <= 1e-15);
  }
  SUBCASE("random instances") {
    Rng rng(12);
    for (int i = 0; i < 100; ++i) {
      const DiscreteChain k = random_positive_chain(5, rng);
      const EVector pi = stationary_distribution(random_positive_chain(5, rng)).pi;
      const Matrix R = build_mh_kernel(k.P, pi);
      CHECK(inf_norm((pi.transpose() * R).transpose() - pi) <= 1e-12);
      CHECK(mh_gkkt_equivalence(k.P, pi).max_discrepancy <= 1e-12);
    }
  }
}

TEST_CASE("chain files") {
  const auto dir = test::scratch_dir("chain_files");
  Rng rng(13);
  const DiscreteChain c = random_positive_chain(4, rng);
  write_chain_file(dir / "c.csv", c, Subset{1, 3});
  const ChainFile back = read_chain_file(dir / "c.csv");
  CHECK((back.chain.P - c.P).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(back.C);
  CHECK(*back.C == Subset{1, 3});

  test::write_file(dir / "short.csv", "0.5,0.5\n0.6,0.3\n");
  try {
    (void)read_chain_file(dir / "short.csv");
    FAIL("expected OracleError");
  } catch (const OracleError& e) {
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
  test::write_file(dir / "ragged.csv", "0.5,0.5\n1.0\n");
  CHECK_THROWS_AS(read_chain_file(dir / "ragged.csv"), OracleError);
  test::write_file(dir / "subset.csv", "0,1\n1,0\nC: 0,7\n");
  CHECK_THROWS_AS(read_chain_file(dir / "subset.csv"), OracleError);
}
