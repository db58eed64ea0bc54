#include <doctest.h>

#include <cmath>
#include <numbers>

#include "kkt/numeric.hpp"
#include "kkt/target.hpp"
#include "support/helpers.hpp"

using namespace kkt;

namespace {

// Composite Simpson rule; the integrand below is negligible outside [-7, 7].
double simpson(double (*f)(double), double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

Vector random_point(Rng& rng, std::size_t d, double scale) {
  Vector x(d);
  for (double& v : x) v = scale * rng.normal();
  return x;
}

}  // namespace

TEST_CASE("bimodal density at a mode and symmetry point") {
  const TargetDensity t = bimodal_target();
  CHECK(t.dim() == 2);
  const Vector mode{10.0, 0.0};
  CHECK(std::exp(t.log_density(mode)) == doctest::Approx(7.9577e-2).epsilon(1e-4));
  const Vector origin{0.0, 0.0};
  const Vector g = t.grad_log_density(origin);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);
  // 2 (4 pi)^-1 e^-50 between the modes.
  CHECK(t.log_density(origin) == doctest::Approx(std::log(1.0 / (2.0 * std::numbers::pi)) - 50.0));
  const Vector off{9.0, 1.0};
  CHECK(test::gradient_relative_error(t, off) <= 1e-5);
}

TEST_CASE("quartic normalizer matches quadrature") {
  const double q = simpson([](double s) { return std::exp(-s * s * s * s); }, -7.0, 7.0, 20000);
  CHECK(std::abs(quartic_normalizer() - q) <= 1e-8);
  CHECK(quartic_normalizer() == doctest::Approx(1.8128).epsilon(1e-4));
}

TEST_CASE("fifteen-mode target") {
  const auto modes = default_fifteen_modes();
  REQUIRE(modes.size() == 14);
  const TargetDensity t = fifteen_mode_target(modes);
  const Vector centre{kQuarticCentre[0], kQuarticCentre[1]};
  CHECK(fifteen_mode_component(modes, centre) == 14);
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const Vector m{modes[i][0], modes[i][1]};
    CHECK(fifteen_mode_component(modes, m) == i);
  }

  // Normalized: midpoint rule over a box holding all components.
  const double h = 0.05;
  double mass = 0.0;
  Vector x(2);
  for (double a = -26.0 + h / 2; a < 10.0; a += h) {
    for (double b = -22.0 + h / 2; b < 14.0; b += h) {
      x[0] = a;
      x[1] = b;
      mass += std::exp(t.log_density(x));
    }
  }
  CHECK(mass * h * h == doctest::Approx(1.0).epsilon(1e-6));

  CHECK_THROWS_AS(fifteen_mode_target({{0.0, 0.0}}), std::invalid_argument);
}

TEST_CASE("stochastic volatility value at the origin") {
  const std::vector<double> ys{0.3, -1.2, 0.7, 2.0, -0.1};
  const TargetDensity t = stochastic_volatility_target(ys);
  CHECK(t.dim() == ys.size() + 2);
  double half_sum = 0.0;
  for (double y : ys) half_sum += 0.5 * y * y;
  const Vector zero(t.dim(), 0.0);
  CHECK(-t.log_density(zero) == doctest::Approx(5.0 + 22.0 * std::log(2.0) + half_sum).epsilon(1e-14));
}

TEST_CASE("Ginzburg-Landau values") {
  GinzburgLandauParams p;
  const TargetDensity t = ginzburg_landau_target(p);
  CHECK(t.dim() == 125);
  const Vector zero(125, 0.0);
  CHECK(t.log_density(zero) == 0.0);
  for (double s : {-1.3, 0.4, 1.0}) {
    const Vector flat(125, s);
    const double expected =
        (125.0 / 2.0) * ((1.0 - p.tau) * s * s + p.tau * p.lambda * s * s * s * s / 2.0);
    CHECK(-t.log_density(flat) == doctest::Approx(expected).epsilon(1e-13));
  }
  GinzburgLandauParams bad;
  bad.side = 1;
  CHECK_THROWS_AS(ginzburg_landau_target(bad), std::invalid_argument);
}

TEST_CASE("gradients agree with central differences on every shipped target") {
  Rng rng(2024);
  auto check = [&](const TargetDensity& t, auto draw) {
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) worst = std::max(worst, test::gradient_relative_error(t, draw()));
    INFO(t.label());
    CHECK(worst <= 1e-4);
  };
  check(bimodal_target(), [&] { return Vector{10.0 * rng.normal(), 3.0 * rng.normal()}; });
  check(fifteen_mode_target(default_fifteen_modes()),
        [&] { return Vector{-7.0 + 6.0 * rng.normal(), -4.0 + 6.0 * rng.normal()}; });
  const auto ys = simulate_sv_observations(100, 3);
  const TargetDensity sv = stochastic_volatility_target(ys);
  check(sv, [&] {
    Vector x = random_point(rng, sv.dim(), 1.0);
    x[0] = -0.6 + 0.2 * rng.normal();
    x[1] = 0.8 + 0.3 * rng.normal();
    return x;
  });
  const TargetDensity gl = ginzburg_landau_target({});
  check(gl, [&] { return random_point(rng, gl.dim(), 1.0); });
}

TEST_CASE("beta = 0 gives rho = 0: the latent path is the noise") {
  // With rho = 0, x_0 = z_0 and x_k = z_k, so the energy separates per site.
  const std::vector<double> ys{0.5, 1.5};
  const TargetDensity t = stochastic_volatility_target(ys);
  const Vector x{0.0, 0.0, 0.3, -0.4};
  double expected = 5.0 + 22.0 * std::log(2.0);
  for (std::size_t k = 0; k < 2; ++k) {
    const double z = x[k + 2];
    expected += 0.5 * z + 0.5 * (std::exp(-z) * ys[k] * ys[k] + z * z);
  }
  CHECK(-t.log_density(x) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("simulated SV observations are reproducible") {
  const auto a = simulate_sv_observations(100, 11);
  const auto b = simulate_sv_observations(100, 11);
  const auto c = simulate_sv_observations(100, 12);
  CHECK(a == b);
  CHECK(a != c);
  for (double y : a) CHECK(std::isfinite(y));
}

TEST_CASE("counted views tally evaluations") {
  const TargetDensity t = standard_normal_target(3);
  EvalCounts counts;
  const TargetDensity c = t.counted(counts);
  const Vector x{0.1, 0.2, 0.3};
  (void)c.log_density(x);
  (void)c.log_density(x);
  (void)c.grad_log_density(x);
  (void)t.log_density(x);
  (void)c.uncounted().log_density(x);
  CHECK(counts.density == 2);
  CHECK(counts.gradient == 1);
}

TEST_CASE("data files") {
  const auto dir = test::scratch_dir("data_io");
  const std::vector<double> ys{0.25, -1e-300, 3.5};
  write_observations_csv(dir / "y.csv", ys);
  CHECK(read_observations_csv(dir / "y.csv") == ys);

  test::write_file(dir / "bad.csv", "y\n1.0\nabc\n");
  CHECK_THROWS_AS(read_observations_csv(dir / "bad.csv"), DataFileError);
  test::write_file(dir / "header.csv", "x\n1.0\n");
  CHECK_THROWS_AS(read_observations_csv(dir / "header.csv"), DataFileError);

  std::string text = "x1,x2\n";
  for (const auto& m : default_fifteen_modes()) {
    text += std::to_string(m[0]) + "," + std::to_string(m[1]) + "\n";
  }
  test::write_file(dir / "modes.csv", text);
  const auto modes = read_modes_csv(dir / "modes.csv");
  REQUIRE(modes.size() == 14);
  CHECK(modes[13][0] == doctest::Approx(default_fifteen_modes()[13][0]));
  test::write_file(dir / "modes_short.csv", "x1,x2\n1,2\n3.5,-4\n");
  CHECK_THROWS_AS(read_modes_csv(dir / "modes_short.csv"), DataFileError);
  test::write_file(dir / "modes_bad.csv", "x1,x2\n1\n");
  CHECK_THROWS_AS(read_modes_csv(dir / "modes_bad.csv"), DataFileError);

  test::write_file(dir / "centres.csv", "x1,x2,x3\n1,2,3\n-1,0,0.5\n");
  const auto centres = read_centres_csv(dir / "centres.csv");
  REQUIRE(centres.size() == 2);
  CHECK(centres[0].size() == 3);
  CHECK_THROWS_AS(read_observations_csv(dir / "missing.csv"), DataFileError);
}
