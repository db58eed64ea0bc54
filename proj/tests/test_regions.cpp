#include <doctest.h>

#include <cmath>
#include <numbers>

#include "kkt/numeric.hpp"
#include "kkt/target.hpp"

using namespace kkt;

namespace {

TargetDensity constant_target(std::size_t dim, double log_value) {
  return TargetDensity(
      dim, "constant", [log_value](std::span<const double>) { return log_value; },
      [](std::span<const double>, std::span<double> g) {
        for (double& v : g) v = 0.0;
      });
}

// log pi_u(x) = a x_0 + shift, a linear log-density used for ratio checks.
TargetDensity linear_target(double a, double shift) {
  return TargetDensity(
      1, "linear", [a, shift](std::span<const double> x) { return a * x[0] + shift; },
      [a](std::span<const double>, std::span<double> g) { g[0] = a; });
}

EnvelopeRegion bimodal_envelope() {
  const Box box = Box::cube(2, -15.0, 15.0);
  return envelope_region(bimodal_target(), uniform_instrumental(box),
                         std::log(1.3 / std::numbers::pi), box);
}

}  // namespace

TEST_CASE("level sets use a strict inequality") {
  const CriticalRegion gl = level_set_region(ginzburg_landau_target({}), 100.0);
  CHECK_FALSE(gl.contains(Vector(125, 0.0)));
  CHECK(gl.contains(Vector(125, 3.0)));

  // Threshold at -log(c q) for the bimodal envelope constants.
  const double threshold = -std::log(1.3 / std::numbers::pi / 900.0);
  const CriticalRegion bi = level_set_region(bimodal_target(), threshold);
  CHECK_FALSE(bi.contains(Vector{10.0, 0.0}));
  CHECK(bi.contains(Vector{0.0, 0.0}));

  const CriticalRegion edge = level_set_region(constant_target(1, -2.5), 2.5);
  CHECK_FALSE(edge.contains(Vector{0.0}));
  const CriticalRegion below = level_set_region(constant_target(1, -2.5), std::nextafter(2.5, 0.0));
  CHECK(below.contains(Vector{0.0}));

  CHECK_THROWS_AS(level_set_region(bimodal_target(), std::nan("")), std::invalid_argument);
}

TEST_CASE("bimodal envelope set") {
  const EnvelopeRegion env = bimodal_envelope();
  const CriticalRegion c = env.region();
  CHECK_FALSE(c.contains(Vector{10.0, 0.0}));
  CHECK(c.contains(Vector{0.0, 0.0}));
  CHECK_FALSE(c.contains(Vector{20.0, 0.0}));
  // Pure: repeated calls agree.
  for (int i = 0; i < 3; ++i) CHECK(c.contains(Vector{0.0, 0.0}) == env.contains(Vector{0.0, 0.0}));
}

TEST_CASE("envelope boundary belongs to the set") {
  const Box box = Box::cube(1, 0.0, 2.0);
  const Instrumental q = uniform_instrumental(box);
  // pi = c q exactly on the box.
  const EnvelopeRegion env = envelope_region(constant_target(1, std::log(0.5)), q, 0.0, box);
  CHECK(env.contains(Vector{1.0}));
  CHECK(env.contains(Vector{0.0}));
  CHECK(env.contains(Vector{2.0}));
  CHECK_FALSE(env.contains(Vector{2.5}));
}

TEST_CASE("alpha from unnormalized densities") {
  const TargetDensity p = linear_target(0.75, -1.25);

  const AlphaFunction same = alpha_from_unnormalized(p, p, 0.0);
  for (double x : {-3.0, 0.0, 2.5}) CHECK(same(Vector{x}) == 1.0);

  const AlphaFunction quarter = alpha_from_unnormalized(p, linear_target(0.75, -1.25 + std::log(0.5)),
                                                        std::log(2.0));
  CHECK(quarter(Vector{1.0}) == doctest::Approx(0.25).epsilon(1e-15));

  const CriticalRegion positive{[](std::span<const double> x) { return x[0] > 0.0; }, "x > 0"};
  const AlphaFunction ind = alpha_from_unnormalized(p, restrict_to(p, positive), 0.0);
  const AlphaFunction direct = alpha_indicator(positive);
  for (double x : {-2.0, -1e-9, 1e-9, 4.0}) CHECK(ind(Vector{x}) == direct(Vector{x}));
  CHECK(ind.clamp_events() == 0);
}

TEST_CASE("alpha is invariant under a common scale of both densities") {
  // Dyadic log values keep every sum exact, so the comparison is bitwise.
  const AlphaFunction a =
      alpha_from_unnormalized(linear_target(0.5, -0.25), linear_target(0.5, -1.5), 0.0);
  const AlphaFunction b =
      alpha_from_unnormalized(linear_target(0.5, 3.75), linear_target(0.5, 2.5), 0.0);
  for (double x : {-2.0, 0.0, 0.5, 3.0}) CHECK(a(Vector{x}) == b(Vector{x}));
}

TEST_CASE("alpha clamps out-of-range values and counts them") {
  const AlphaFunction over = alpha_from_unnormalized(linear_target(0.0, 0.0), linear_target(0.0, 1.0), 0.0);
  CHECK(over(Vector{0.0}) == 1.0);
  CHECK(over(Vector{1.0}) == 1.0);
  CHECK(over.clamp_events() == 2);
  const AlphaFunction nan_alpha([](std::span<const double>) { return std::nan(""); }, "nan");
  CHECK(nan_alpha(Vector{0.0}) == 0.0);
  CHECK(nan_alpha.clamp_events() == 1);
}

TEST_CASE("restriction to a region") {
  const TargetDensity t = standard_normal_target(1);
  const CriticalRegion positive{[](std::span<const double> x) { return x[0] > 0.0; }, "x > 0"};
  const TargetDensity r = restrict_to(t, positive);
  CHECK(r.log_density(Vector{-1.0}) == kNegInf);
  CHECK(r.log_density(Vector{1.0}) == t.log_density(Vector{1.0}));
}

TEST_CASE("box helpers") {
  const Box box = Box::cube(2, -1.0, 3.0);
  CHECK(box.log_volume() == doctest::Approx(std::log(16.0)));
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) CHECK(box.contains(box.sample_uniform(rng)));
  CHECK_FALSE(box.contains(Vector{-1.5, 0.0}));
  const Instrumental q = uniform_instrumental(box);
  CHECK(q.log_density(Vector{0.0, 0.0}) == doctest::Approx(-std::log(16.0)));
  CHECK(q.log_density(Vector{4.0, 0.0}) == kNegInf);
}
