#include <doctest.h>

#include <cmath>

#include "funreg/metrics.hpp"
#include "funreg/model.hpp"

using namespace funreg;

namespace {

ModelInstance test_instance() {
  CommutingConfig c;
  c.p_k = 2.0;
  c.p_c = 2.0;
  c.length = 8;
  c.grid_size = 96;
  c.noise_sigma = 0.2;
  return build_commuting_instance(c);
}

}  // namespace

TEST_CASE("excess prediction error basics") {
  const ModelInstance inst = test_instance();
  CHECK(excess_prediction_error(inst.beta_star, inst) <= 1e-14);

  // beta* = 0 variant: beta = psi_1 -> sigma_1 (Rayleigh quotient)
  CommutingConfig c;
  c.p_k = 2.0;
  c.p_c = 2.0;
  c.length = 8;
  c.grid_size = 96;
  c.seed_scale = 0.0;  // beta* = 0
  const ModelInstance zero_inst = build_commuting_instance(c);
  const DiscreteFunction psi1 = zero_inst.LC_dec.eigenfunction(0);
  CHECK(excess_prediction_error(psi1, zero_inst) ==
        doctest::Approx(zero_inst.LC_dec.eigenvalues()(0)).epsilon(1e-10));
}

TEST_CASE("estimation error in the K norm") {
  const ModelInstance inst = test_instance();
  const KNormResult at_target = estimation_error_K(inst.beta_star, inst, 1e-10);
  CHECK(at_target.value <= 1e-12);
  CHECK(at_target.discarded_energy <= 1e-12);

  // beta - beta* = L_K^{1/2} f -> value = ||f||_2^2
  RandomStream rng(41);
  Vector coeffs = Vector::Zero(inst.grid.size());
  for (Index l = 0; l < 8; ++l) coeffs(l) = rng.normal();
  const DiscreteFunction f = inst.LK_dec.synthesize(coeffs);
  DiscreteFunction beta = inst.LK_half.apply(f);
  beta.values += inst.beta_star.values;
  const KNormResult kn = estimation_error_K(beta, inst, 1e-10);
  CHECK(kn.value == doctest::Approx(inner_product(f, f)).epsilon(1e-6));

  // beta - beta* = phi_1 -> 1 / lambda_1
  DiscreteFunction beta2 = inst.LK_dec.eigenfunction(0);
  beta2.values += inst.beta_star.values;
  const KNormResult kn2 = estimation_error_K(beta2, inst, 1e-10);
  CHECK(kn2.value == doctest::Approx(1.0 / inst.LK_dec.eigenvalues()(0)).epsilon(1e-8));
}

TEST_CASE("norm comparison inequalities on the retained eigenspace") {
  const ModelInstance inst = test_instance();
  RandomStream rng(43);
  for (int rep = 0; rep < 20; ++rep) {
    Vector coeffs = Vector::Zero(inst.grid.size());
    for (Index l = 0; l < 8; ++l) coeffs(l) = rng.normal();
    DiscreteFunction beta = inst.LK_dec.synthesize(coeffs);
    DiscreteFunction diff = beta;  // beta* cancels in the difference below
    beta.values += inst.beta_star.values;

    const Scalar pred = excess_prediction_error(beta, inst);
    const Scalar l2_sq = inner_product(diff, diff);
    const KNormResult kn = estimation_error_K(beta, inst, 1e-10);
    CHECK(pred <= inst.kappa2_sq * l2_sq * (1 + 1e-9));
    CHECK(l2_sq <= inst.kappa1_sq * kn.value * (1 + 1e-9));
  }
}

TEST_CASE("monte carlo excess error agrees with the operator form") {
  const ModelInstance inst = test_instance();
  RandomStream rng(48);
  CHECK_THROWS_AS(mc_excess_error(inst.beta_star, inst, 50, rng), std::invalid_argument);

  // beta = beta* -> exactly zero integrand
  const McEstimate zero = mc_excess_error(inst.beta_star, inst, 1000, rng);
  CHECK(zero.estimate <= 1e-20);

  for (int rep = 0; rep < 5; ++rep) {
    Vector v(inst.grid.size());
    for (Index i = 0; i < inst.grid.size(); ++i) v(i) = 0.3 * rng.normal();
    DiscreteFunction beta = make_function(inst.grid, v);
    beta.values += inst.beta_star.values;
    const Scalar exact = excess_prediction_error(beta, inst);
    const McEstimate mc = mc_excess_error(beta, inst, 20000, rng);
    CHECK(std::abs(mc.estimate - exact) <= 3.0 * mc.stderr_);
  }

  // stderr ~ n^-1/2
  Vector v(inst.grid.size());
  for (Index i = 0; i < inst.grid.size(); ++i) v(i) = 0.5 * rng.normal();
  DiscreteFunction beta = make_function(inst.grid, v);
  beta.values += inst.beta_star.values;
  const McEstimate a = mc_excess_error(beta, inst, 100, rng);
  const McEstimate b = mc_excess_error(beta, inst, 10000, rng);
  const Scalar ratio = a.stderr_ / b.stderr_;  // expect ~10
  CHECK(ratio > 10.0 / 1.5);
  CHECK(ratio < 10.0 * 1.5);
}

TEST_CASE("operator form vs MC form on 50 random betas") {
  const ModelInstance inst = test_instance();
  RandomStream rng(52);
  for (int rep = 0; rep < 50; ++rep) {
    Vector v(inst.grid.size());
    for (Index i = 0; i < inst.grid.size(); ++i) v(i) = 0.4 * rng.normal();
    DiscreteFunction beta = make_function(inst.grid, v);
    beta.values += inst.beta_star.values;
    const Scalar exact = excess_prediction_error(beta, inst);
    const McEstimate mc = mc_excess_error(beta, inst, 4000, rng);
    CHECK(std::abs(mc.estimate - exact) <= 3.0 * mc.stderr_);
  }
}
