#include <doctest.h>

#include <cmath>
#include <numbers>

#include "funreg/errors.hpp"
#include "funreg/grid.hpp"
#include "funreg/random.hpp"

using namespace funreg;

TEST_CASE("build_grid rejects sizes below the minimum") {
  CHECK_THROWS_AS(build_grid(2, QuadScheme::CompositeTrapezoid), std::invalid_argument);
  CHECK_THROWS_AS(build_grid(7, QuadScheme::GaussLegendre), std::invalid_argument);
}

TEST_CASE("trapezoid grid on 9 points") {
  const Grid g = build_grid(9, QuadScheme::CompositeTrapezoid);
  REQUIRE(g.size() == 9);
  CHECK(g.nodes()(0) == 0.0);
  CHECK(g.nodes()(8) == 1.0);
  CHECK(g.nodes()(1) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(g.weights()(0) == doctest::Approx(1.0 / 16).epsilon(1e-15));
  CHECK(g.weights()(4) == doctest::Approx(1.0 / 8).epsilon(1e-15));
  CHECK(g.weights().sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gauss-legendre weights sum to one and nodes are sorted") {
  const Grid g = build_grid(64, QuadScheme::GaussLegendre);
  CHECK(std::abs(g.weights().sum() - 1.0) < 1e-14);
  for (Index i = 1; i < g.size(); ++i) CHECK(g.nodes()(i) > g.nodes()(i - 1));
  CHECK(g.nodes()(0) > 0.0);
  CHECK(g.nodes()(g.size() - 1) < 1.0);
}

TEST_CASE("gauss-legendre is exact for polynomials up to degree 2m-1") {
  const Index m = 12;
  const Grid g = build_grid(m, QuadScheme::GaussLegendre);
  // integrate t^d over [0,1] for d up to 2m-1
  for (int d = 0; d < 2 * m; ++d) {
    Scalar acc = 0.0;
    for (Index i = 0; i < m; ++i) acc += g.weights()(i) * std::pow(g.nodes()(i), d);
    const Scalar exact = 1.0 / (d + 1.0);
    CHECK(std::abs(acc - exact) <= 1e-10 * exact);
  }
}

TEST_CASE("trapezoid integrates affine functions exactly") {
  const Grid g = build_grid(33, QuadScheme::CompositeTrapezoid);
  Scalar acc = 0.0;
  for (Index i = 0; i < g.size(); ++i) acc += g.weights()(i) * (3.0 * g.nodes()(i) - 0.7);
  CHECK(std::abs(acc - (1.5 - 0.7)) < 1e-14);
}

TEST_CASE("inner product basics") {
  const Grid g = build_grid(128, QuadScheme::GaussLegendre);
  const DiscreteFunction zero = zero_function(g);
  CHECK(inner_product(zero, zero) == 0.0);

  const DiscreteFunction one = make_function(g, Vector::Ones(g.size()));
  CHECK(inner_product(one, one) == doctest::Approx(1.0).epsilon(1e-12));

  Vector s(g.size()), c(g.size());
  for (Index i = 0; i < g.size(); ++i) {
    s(i) = std::sin(2 * std::numbers::pi * g.nodes()(i));
    c(i) = std::cos(2 * std::numbers::pi * g.nodes()(i));
  }
  const DiscreteFunction fs = make_function(g, s);
  const DiscreteFunction fc = make_function(g, c);
  CHECK(std::abs(inner_product(fs, fc)) < 1e-6);
  CHECK(l2_norm(fs) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-6));

  const DiscreteFunction two = make_function(g, Vector::Constant(g.size(), 2.0));
  CHECK(l2_norm(two) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("inner product is symmetric for random functions") {
  const Grid g = build_grid(64, QuadScheme::CompositeTrapezoid);
  RandomStream rng(7);
  for (int rep = 0; rep < 10; ++rep) {
    Vector a(g.size()), b(g.size());
    for (Index i = 0; i < g.size(); ++i) {
      a(i) = rng.normal();
      b(i) = rng.normal();
    }
    const DiscreteFunction fa = make_function(g, a);
    const DiscreteFunction fb = make_function(g, b);
    CHECK(inner_product(fa, fb) == doctest::Approx(inner_product(fb, fa)).epsilon(1e-14));
  }
}

TEST_CASE("grid mismatch is detected") {
  const Grid g1 = build_grid(16, QuadScheme::GaussLegendre);
  const Grid g2 = build_grid(16, QuadScheme::GaussLegendre);
  CHECK_THROWS_AS(inner_product(zero_function(g1), zero_function(g2)), GridMismatchError);
}

TEST_CASE("trapezoid refinement error decays like m^-2 for smooth integrands") {
  auto integral = [](Index m) {
    const Grid g = build_grid(m, QuadScheme::CompositeTrapezoid);
    Scalar acc = 0.0;
    for (Index i = 0; i < g.size(); ++i) acc += g.weights()(i) * std::exp(g.nodes()(i));
    return acc;
  };
  const Scalar exact = std::numbers::e - 1.0;
  const Scalar e1 = std::abs(integral(65) - exact);
  const Scalar e2 = std::abs(integral(129) - exact);
  const Scalar ratio = e1 / e2;  // halving h cuts the error ~4x
  CHECK(ratio > 3.0);
  CHECK(ratio < 5.0);
}
